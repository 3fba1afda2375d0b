#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "ragaudit/core.hpp"
#include "ragaudit/predictor.hpp"
#include "ragaudit/report.hpp"
#include "ragaudit/selective.hpp"
#include "ragaudit/signals.hpp"
#include "ragaudit/sufficiency.hpp"

namespace ragaudit {

namespace detail {

// Shortest round-trip representation, stable across runs and platforms.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw Error("cannot format double");
    return std::string(buf, ptr);
}

inline std::string format_fixed1(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 1);
    if (ec != std::errc()) throw Error("cannot format double");
    return std::string(buf, ptr);
}

inline std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) return value;
    std::string quoted = "\"";
    for (char c : value) {
        if (c == '"') quoted += "\"\"";
        else quoted += c;
    }
    quoted += '"';
    return quoted;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path.string());
    return out;
}

template <typename Fn>
inline void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
    if (!std::filesystem::exists(path)) {
        throw MissingInputError("missing file: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
        fn(row, line_no);
    }
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw MissingInputError("missing file: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file: " + path.string());
    try {
        nlohmann::json value;
        in >> value;
        return value;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace detail

// ---- sufficiency verdicts --------------------------------------------------

inline nlohmann::ordered_json verdict_to_json(const SufficiencyVerdict& v) {
    nlohmann::ordered_json row;
    row["id"] = v.instance_id;
    row["sufficient"] = v.sufficient;
    row["rater"] = to_string(v.rater);
    if (v.chunk_votes) {
        row["chunk_votes"] = *v.chunk_votes;
    }
    if (v.score) row["score"] = *v.score;
    return row;
}

inline SufficiencyVerdict verdict_from_json(const nlohmann::json& row, const std::string& where) {
    try {
        SufficiencyVerdict v;
        v.instance_id = row.at("id").get<std::string>();
        v.sufficient = row.at("sufficient").get<bool>();
        v.rater = rater_kind_from_string(row.at("rater").get<std::string>());
        if (row.contains("chunk_votes")) {
            v.chunk_votes = row["chunk_votes"].get<std::vector<bool>>();
        }
        if (row.contains("score")) v.score = row["score"].get<double>();
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ParseError(where + ": " + e.what());
    }
}

inline void save_verdicts(const std::filesystem::path& path,
                          const std::vector<SufficiencyVerdict>& verdicts) {
    std::ofstream out = detail::open_for_write(path);
    for (const SufficiencyVerdict& v : verdicts) out << verdict_to_json(v).dump() << '\n';
}

inline std::vector<SufficiencyVerdict> load_verdicts(const std::filesystem::path& path) {
    std::vector<SufficiencyVerdict> verdicts;
    detail::for_each_jsonl(path, [&](const nlohmann::json& row, std::size_t line_no) {
        verdicts.push_back(
            verdict_from_json(row, path.string() + " line " + std::to_string(line_no)));
    });
    return verdicts;
}

// ---- signal records ---------------------------------------------------------

inline nlohmann::ordered_json signal_to_json(const SignalRecord& r) {
    nlohmann::ordered_json row;
    row["id"] = r.instance_id;
    row["confidence"] = r.confidence;
    row["confidence_kind"] = to_string(r.confidence_kind);
    row["sufficient"] = r.sufficient;
    row["chosen_answer"] = r.chosen_answer;
    row["abstained"] = r.abstained;
    return row;
}

inline SignalRecord signal_from_json(const nlohmann::json& row, const std::string& where) {
    try {
        SignalRecord r;
        r.instance_id = row.at("id").get<std::string>();
        r.confidence = row.at("confidence").get<double>();
        r.confidence_kind = confidence_kind_from_string(row.at("confidence_kind").get<std::string>());
        r.sufficient = row.at("sufficient").get<bool>();
        r.chosen_answer = row.at("chosen_answer").get<std::string>();
        r.abstained = row.at("abstained").get<bool>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ParseError(where + ": " + e.what());
    }
}

inline void save_signals(const std::filesystem::path& path,
                         const std::vector<SignalRecord>& records) {
    std::ofstream out = detail::open_for_write(path);
    for (const SignalRecord& r : records) out << signal_to_json(r).dump() << '\n';
}

inline std::vector<SignalRecord> load_signals(const std::filesystem::path& path) {
    std::vector<SignalRecord> records;
    detail::for_each_jsonl(path, [&](const nlohmann::json& row, std::size_t line_no) {
        records.push_back(signal_from_json(row, path.string() + " line " + std::to_string(line_no)));
    });
    return records;
}

// ---- response records -------------------------------------------------------

inline nlohmann::ordered_json response_to_json(const ResponseRecord& r) {
    nlohmann::ordered_json row;
    row["id"] = r.instance_id;
    row["response"] = r.response_text;
    row["extracted_answer"] = r.extracted_answer;
    row["rating"] = to_string(r.rating);
    row["rating_source"] = to_string(r.rating_source);
    return row;
}

inline ResponseRecord response_from_json(const nlohmann::json& row, const std::string& where) {
    try {
        ResponseRecord r;
        r.instance_id = row.at("id").get<std::string>();
        r.response_text = row.at("response").get<std::string>();
        r.extracted_answer = row.at("extracted_answer").get<std::string>();
        r.rating = rating_from_string(row.at("rating").get<std::string>());
        r.rating_source = rating_source_from_string(row.at("rating_source").get<std::string>());
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
}

inline void save_responses(const std::filesystem::path& path,
                           const std::vector<ResponseRecord>& records) {
    std::ofstream out = detail::open_for_write(path);
    for (const ResponseRecord& r : records) out << response_to_json(r).dump() << '\n';
}

inline std::vector<ResponseRecord> load_responses(const std::filesystem::path& path) {
    std::vector<ResponseRecord> records;
    detail::for_each_jsonl(path, [&](const nlohmann::json& row, std::size_t line_no) {
        records.push_back(
            response_from_json(row, path.string() + " line " + std::to_string(line_no)));
    });
    return records;
}

// ---- predictor model --------------------------------------------------------

inline void save_model(const std::filesystem::path& path, const LogisticModel& model,
                       const std::string& config_digest) {
    nlohmann::ordered_json doc;
    doc["kind"] = "hallucination_predictor";
    doc["version"] = 1;
    doc["feature_order"] = nlohmann::json::array({feature_order()[0], feature_order()[1]});
    doc["weights"] = {{feature_order()[0], model.weights[0]},
                      {feature_order()[1], model.weights[1]}};
    doc["bias"] = model.bias;
    doc["hyperparams"] = {{"l2_lambda", model.hyperparams.l2_lambda},
                          {"learning_rate", model.hyperparams.learning_rate},
                          {"epochs", model.hyperparams.epochs}};
    doc["use_sufficiency"] = model.use_sufficiency;
    doc["training"] = {{"seed", model.seed},
                       {"n_examples", model.n_examples},
                       {"final_loss", model.final_loss}};
    doc["config_digest"] = config_digest;
    std::ofstream out = detail::open_for_write(path);
    out << doc.dump(2) << '\n';
}

inline LogisticModel load_model(const std::filesystem::path& path) {
    nlohmann::json doc = detail::load_json_file(path);
    try {
        if (doc.at("kind").get<std::string>() != "hallucination_predictor") {
            throw ParseError(path.string() + ": not a predictor model file");
        }
        auto order = doc.at("feature_order").get<std::vector<std::string>>();
        if (order.size() != 2 || order[0] != feature_order()[0] || order[1] != feature_order()[1]) {
            throw ParseError(path.string() + ": unexpected feature order");
        }
        LogisticModel model;
        model.weights[0] = doc.at("weights").at(order[0]).get<double>();
        model.weights[1] = doc.at("weights").at(order[1]).get<double>();
        model.bias = doc.at("bias").get<double>();
        model.hyperparams.l2_lambda = doc.at("hyperparams").at("l2_lambda").get<double>();
        model.hyperparams.learning_rate = doc.at("hyperparams").at("learning_rate").get<double>();
        model.hyperparams.epochs = doc.at("hyperparams").at("epochs").get<int>();
        model.use_sufficiency = doc.at("use_sufficiency").get<bool>();
        model.seed = doc.at("training").at("seed").get<std::uint64_t>();
        model.n_examples = doc.at("training").at("n_examples").get<std::size_t>();
        model.final_loss = doc.at("training").at("final_loss").get<double>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

// ---- coverage curves --------------------------------------------------------

inline void save_curve_csv(const std::filesystem::path& path, const CoverageCurve& curve) {
    std::ofstream out = detail::open_for_write(path);
    out << "threshold,coverage,selective_accuracy,n_answered,n_correct\n";
    for (const CoveragePoint& p : curve.points) {
        out << detail::format_double(p.threshold) << ',' << detail::format_double(p.coverage)
            << ',' << detail::format_double(p.selective_accuracy) << ',' << p.n_answered << ','
            << p.n_correct << '\n';
    }
}

inline nlohmann::ordered_json curve_to_json(const CoverageCurve& curve) {
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (const CoveragePoint& p : curve.points) {
        nlohmann::ordered_json row;
        row["threshold"] = p.threshold;
        row["coverage"] = p.coverage;
        row["selective_accuracy"] = p.selective_accuracy;
        row["n_answered"] = p.n_answered;
        row["n_correct"] = p.n_correct;
        row["accuracy_undefined"] = p.accuracy_undefined;
        points.push_back(std::move(row));
    }
    nlohmann::ordered_json doc;
    doc["kind"] = "coverage_curve";
    doc["version"] = 1;
    doc["points"] = std::move(points);
    return doc;
}

inline void save_curve_json(const std::filesystem::path& path, const CoverageCurve& curve,
                            const std::string& config_digest) {
    nlohmann::ordered_json doc = curve_to_json(curve);
    doc["config_digest"] = config_digest;
    std::ofstream out = detail::open_for_write(path);
    out << doc.dump(2) << '\n';
}

inline CoverageCurve load_curve_json(const std::filesystem::path& path) {
    nlohmann::json doc = detail::load_json_file(path);
    try {
        if (doc.at("kind").get<std::string>() != "coverage_curve") {
            throw ParseError(path.string() + ": not a coverage curve file");
        }
        CoverageCurve curve;
        for (const auto& row : doc.at("points")) {
            CoveragePoint p;
            p.threshold = row.at("threshold").get<double>();
            p.coverage = row.at("coverage").get<double>();
            p.selective_accuracy = row.at("selective_accuracy").get<double>();
            p.n_answered = row.at("n_answered").get<std::size_t>();
            p.n_correct = row.at("n_correct").get<std::size_t>();
            p.accuracy_undefined = row.value("accuracy_undefined", false);
            curve.points.push_back(p);
        }
        return curve;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

// ---- report tables ----------------------------------------------------------

struct ReportLabels {
    std::string model = "model";
    std::string dataset = "dataset";
};

inline void save_stratified_csv(const std::filesystem::path& path,
                                const std::vector<StratifiedBreakdown>& breakdowns,
                                const ReportLabels& labels) {
    std::ofstream out = detail::open_for_write(path);
    out << "model,dataset,stratum,n,pct_correct,pct_abstain,pct_hallucinate\n";
    for (const StratifiedBreakdown& b : breakdowns) {
        out << detail::csv_field(labels.model) << ',' << detail::csv_field(labels.dataset) << ','
            << to_string(b.stratum) << ',' << b.n << ',' << detail::format_fixed1(b.pct_correct)
            << ',' << detail::format_fixed1(b.pct_abstain) << ','
            << detail::format_fixed1(b.pct_hallucinate) << '\n';
    }
}

inline nlohmann::ordered_json stratified_to_json(const std::vector<StratifiedBreakdown>& breakdowns,
                                                 const ReportLabels& labels) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const StratifiedBreakdown& b : breakdowns) {
        nlohmann::ordered_json row;
        row["model"] = labels.model;
        row["dataset"] = labels.dataset;
        row["stratum"] = to_string(b.stratum);
        row["n"] = b.n;
        row["n_correct"] = b.n_correct;
        row["n_abstain"] = b.n_abstain;
        row["n_hallucinate"] = b.n_hallucinate;
        row["pct_correct"] = b.pct_correct;
        row["pct_abstain"] = b.pct_abstain;
        row["pct_hallucinate"] = b.pct_hallucinate;
        row["empty_stratum"] = b.empty_stratum;
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void save_rater_metrics_csv(const std::filesystem::path& path,
                                   const std::map<std::string, RaterMetrics>& metrics) {
    std::ofstream out = detail::open_for_write(path);
    out << "rater,f1,accuracy,precision,recall\n";
    for (const auto& [rater, m] : metrics) {
        out << detail::csv_field(rater) << ',' << detail::format_double(m.f1) << ','
            << detail::format_double(m.accuracy) << ',' << detail::format_double(m.precision)
            << ',' << detail::format_double(m.recall) << '\n';
    }
}

// Writes the full report bundle: CSV tables, JSON mirrors, and a plain-text
// summary. Deterministic: identical inputs give byte-identical files.
inline void emit_report(const std::filesystem::path& out_dir,
                        const std::vector<StratifiedBreakdown>& breakdowns,
                        const std::map<std::string, CoverageCurve>& curves,
                        const std::map<std::string, RaterMetrics>& rater_metrics,
                        const ReportLabels& labels, const std::string& config_digest) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create report directory " + out_dir.string() + ": " + ec.message());

    save_stratified_csv(out_dir / "stratified.csv", breakdowns, labels);
    {
        nlohmann::ordered_json doc;
        doc["kind"] = "stratified_breakdown";
        doc["config_digest"] = config_digest;
        doc["rows"] = stratified_to_json(breakdowns, labels);
        std::ofstream out = detail::open_for_write(out_dir / "stratified.json");
        out << doc.dump(2) << '\n';
    }
    save_rater_metrics_csv(out_dir / "rater_metrics.csv", rater_metrics);
    {
        nlohmann::ordered_json doc;
        doc["kind"] = "rater_metrics";
        doc["config_digest"] = config_digest;
        nlohmann::ordered_json rows = nlohmann::ordered_json::object();
        for (const auto& [rater, m] : rater_metrics) {
            rows[rater] = {{"f1", m.f1},
                           {"accuracy", m.accuracy},
                           {"precision", m.precision},
                           {"recall", m.recall}};
        }
        doc["raters"] = std::move(rows);
        std::ofstream out = detail::open_for_write(out_dir / "rater_metrics.json");
        out << doc.dump(2) << '\n';
    }
    for (const auto& [name, curve] : curves) {
        save_curve_csv(out_dir / (name + ".csv"), curve);
        save_curve_json(out_dir / (name + ".json"), curve, config_digest);
    }

    std::ofstream out = detail::open_for_write(out_dir / "summary.txt");
    out << "run summary\n";
    out << "model: " << labels.model << '\n';
    out << "dataset: " << labels.dataset << '\n';
    out << "config: " << config_digest << '\n';
    out << '\n';
    out << "response ratings by context sufficiency (positive class: sufficient)\n";
    for (const StratifiedBreakdown& b : breakdowns) {
        out << "  " << to_string(b.stratum) << ": n=" << b.n;
        if (b.empty_stratum) {
            out << " (empty stratum)\n";
            continue;
        }
        out << " correct=" << detail::format_fixed1(b.pct_correct) << "%"
            << " abstain=" << detail::format_fixed1(b.pct_abstain) << "%"
            << " hallucinate=" << detail::format_fixed1(b.pct_hallucinate) << "%\n";
    }
    if (!curves.empty()) {
        out << '\n' << "selective generation curves\n";
        for (const auto& [name, curve] : curves) {
            out << "  " << name << ": " << curve.points.size() << " points";
            if (!curve.points.empty()) {
                const CoveragePoint& top = curve.points.back();
                out << ", max coverage " << detail::format_double(top.coverage) << " at accuracy "
                    << detail::format_double(top.selective_accuracy);
            }
            out << '\n';
        }
    }
    if (!rater_metrics.empty()) {
        out << '\n' << "sufficiency rater metrics\n";
        for (const auto& [rater, m] : rater_metrics) {
            out << "  " << rater << ": f1=" << detail::format_double(m.f1)
                << " accuracy=" << detail::format_double(m.accuracy)
                << " precision=" << detail::format_double(m.precision)
                << " recall=" << detail::format_double(m.recall) << '\n';
        }
    }
}

}  // namespace ragaudit
