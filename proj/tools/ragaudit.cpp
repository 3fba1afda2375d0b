// Command-line front end: one subcommand per pipeline stage.
//
// Stage progress and call counters go to stderr so stdout artifacts and the
// files under --out stay byte-identical between cold and warm (cached) runs.
// Exit codes: 0 = success, 2 = configuration problems (bad flags, unreadable
// paths, invalid config), 1 = everything else.

#include <cstdint>
#include <iostream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "ragaudit/ragaudit.hpp"

namespace {

struct Flags {
    std::string config_path;
    std::string dataset;
    std::string cache_dir;
    std::string out_dir;
    std::string templates_dir;
    std::string rater;
    std::string confidence;
    std::string scorer_script;
    long long budget = -1;
    long long chunk_size = -1;
    long long seed = -1;
    long long parallelism = -1;
    long long search_iters = -1;
    std::vector<std::tuple<std::string, std::string, std::string>> backend_overrides;
};

void add_common(CLI::App* cmd, Flags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON run config file");
    cmd->add_option("--dataset", flags.dataset, "dataset JSONL path");
    cmd->add_option("--cache-dir", flags.cache_dir, "completion cache directory");
    cmd->add_option("--out", flags.out_dir, "output directory for stage artifacts");
    cmd->add_option("--templates-dir", flags.templates_dir, "prompt template override directory");
    cmd->add_option("--rater", flags.rater,
                    "sufficiency rater: full_0shot|full_1shot|chunked|contains_gt|"
                    "entailment_threshold");
    cmd->add_option("--confidence", flags.confidence, "confidence signal: p_true|p_correct");
    cmd->add_option("--scorer-script", flags.scorer_script, "entailment scorer script path");
    cmd->add_option("--budget", flags.budget, "context token budget (0 = no truncation)");
    cmd->add_option("--chunk-size", flags.chunk_size, "chunk size in tokens");
    cmd->add_option("--seed", flags.seed, "run seed");
    cmd->add_option("--parallelism", flags.parallelism, "max in-flight backend requests");
    cmd->add_option("--search-iters", flags.search_iters, "hyperparameter search iterations");
    for (const char* role : {"generator", "autorater", "evaluator"}) {
        for (const char* field : {"kind", "script", "name", "model", "base_url", "path",
                                  "api_key_env", "context_window"}) {
            std::string name = std::string("--backend.") + role + "." + field;
            cmd->add_option_function<std::string>(
                name,
                [&flags, role, field](const std::string& value) {
                    flags.backend_overrides.emplace_back(role, field, value);
                },
                std::string(role) + " backend " + field);
        }
    }
}

ragaudit::RunConfig build_config(const Flags& flags) {
    ragaudit::RunConfig config = flags.config_path.empty()
                                     ? ragaudit::RunConfig{}
                                     : ragaudit::load_config(flags.config_path);
    if (!flags.dataset.empty()) config.dataset = flags.dataset;
    if (!flags.cache_dir.empty()) config.cache_dir = flags.cache_dir;
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (!flags.templates_dir.empty()) config.templates_dir = flags.templates_dir;
    if (!flags.rater.empty()) config.rater = flags.rater;
    if (!flags.confidence.empty()) config.confidence = flags.confidence;
    if (!flags.scorer_script.empty()) config.scorer_script = flags.scorer_script;
    if (flags.budget >= 0) config.budget = static_cast<std::size_t>(flags.budget);
    if (flags.chunk_size >= 0) config.chunk_size = static_cast<std::size_t>(flags.chunk_size);
    if (flags.seed >= 0) config.seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.parallelism >= 0) config.parallelism = static_cast<int>(flags.parallelism);
    if (flags.search_iters >= 0) config.search_iters = static_cast<int>(flags.search_iters);
    for (const auto& [role, field, value] : flags.backend_overrides) {
        ragaudit::apply_backend_override(config, role, field, value);
    }
    return config;
}

std::string pct(std::size_t count, std::size_t n) {
    if (n == 0) return "0.0";
    return ragaudit::detail::format_fixed1(ragaudit::detail::pct_one_decimal(count, n));
}

void print_client_stats(const ragaudit::ClientStatsSnapshot& s) {
    std::cerr << "backend_calls=" << s.backend_calls << " cache_hits=" << s.cache_hits
              << " retries=" << s.retries << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"audits retrieved context sufficiency and gates answers on predicted risk"};
    app.require_subcommand(1);
    Flags flags;
    CLI::App* cmd_label =
        app.add_subcommand("label", "rate context sufficiency for every instance");
    CLI::App* cmd_answer =
        app.add_subcommand("answer", "generate answers and grade them");
    CLI::App* cmd_signals =
        app.add_subcommand("signals", "compute abstention confidence signals");
    CLI::App* cmd_train =
        app.add_subcommand("train", "fit the hallucination predictor");
    CLI::App* cmd_curve =
        app.add_subcommand("curve", "sweep decision thresholds into coverage curves");
    CLI::App* cmd_report =
        app.add_subcommand("report", "emit the stratified report bundle");
    for (CLI::App* cmd : {cmd_label, cmd_answer, cmd_signals, cmd_train, cmd_curve, cmd_report}) {
        add_common(cmd, flags);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad flags are configuration errors
    }

    try {
        ragaudit::RunConfig config = build_config(flags);
        if (cmd_label->parsed()) {
            ragaudit::LabelResult r = ragaudit::run_label(config);
            std::cerr << "labeled " << r.n << " instances\n";
            std::cerr << "sufficient: " << pct(r.n_sufficient, r.n) << "%\n";
            if (r.rater_stats.parse_failures > 0) {
                std::cerr << "parse_failures=" << r.rater_stats.parse_failures << "\n";
            }
            print_client_stats(r.client_stats);
        } else if (cmd_answer->parsed()) {
            ragaudit::AnswerResult r = ragaudit::run_answer(config);
            std::cerr << "answered " << r.n << " instances\n";
            std::cerr << "correct: " << pct(r.n_correct, r.n) << "% abstain: "
                      << pct(r.n_abstain, r.n) << "% hallucinate: "
                      << pct(r.n_hallucinate, r.n) << "%\n";
            print_client_stats(r.client_stats);
        } else if (cmd_signals->parsed()) {
            ragaudit::SignalsResult r = ragaudit::run_signals(config);
            std::cerr << "signals for " << r.n << " instances (abstained=" << r.n_abstained
                      << ", parse_failures=" << r.signal_stats.parse_failures << ")\n";
            print_client_stats(r.client_stats);
        } else if (cmd_train->parsed()) {
            ragaudit::TrainResult r = ragaudit::run_train(config);
            std::cerr << "trained on " << r.n_examples << " examples (" << r.n_excluded
                      << " abstentions excluded)\n";
            std::cerr << "val_loss combined=" << r.combined_report.best_val_loss
                      << " confidence_only=" << r.confidence_only_report.best_val_loss << "\n";
        } else if (cmd_curve->parsed()) {
            ragaudit::CurveResult r = ragaudit::run_curve(config);
            std::cerr << "curve points: combined=" << r.combined.points.size()
                      << " confidence_only=" << r.confidence_only.points.size()
                      << " delta_grid=" << r.deltas.size() << "\n";
        } else if (cmd_report->parsed()) {
            ragaudit::ReportResult r = ragaudit::run_report(config);
            std::cerr << "report written to " << r.report_dir.string() << "\n";
        }
        return 0;
    } catch (const ragaudit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
