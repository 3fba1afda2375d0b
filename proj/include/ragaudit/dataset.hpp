#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragaudit/core.hpp"
#include "ragaudit/tokenizer.hpp"

namespace ragaudit {

struct ContextDocument {
    std::optional<std::string> title;
    std::string body;  // non-empty
    std::optional<std::string> source_url;

    friend bool operator==(const ContextDocument&, const ContextDocument&) = default;
};

// One dataset row: a query, the retrieved context, and the ground-truth
// answers. Immutable after load; safe to share across workers.
struct QAInstance {
    std::string id;
    std::string query;
    std::vector<ContextDocument> context;  // may be empty (closed-book)
    std::vector<std::string> gold_answers;  // non-empty
    std::optional<bool> gold_sufficiency;
    std::optional<std::string> timestamp;  // YYYY-MM-DD

    friend bool operator==(const QAInstance&, const QAInstance&) = default;
};

struct Dataset {
    std::string name;
    std::vector<QAInstance> instances;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Context documents joined into a single text: an optional "Title:" line,
// then the body, documents separated by blank lines. Chunking and the
// full-context raters both see exactly this rendering.
inline std::string flatten_context(const std::vector<ContextDocument>& context) {
    std::string out;
    for (std::size_t i = 0; i < context.size(); ++i) {
        if (i > 0) out += "\n\n";
        const ContextDocument& doc = context[i];
        if (doc.title && !doc.title->empty()) {
            out += "Title: ";
            out += *doc.title;
            out += "\n";
        }
        out += doc.body;
    }
    return out;
}

namespace detail {

inline bool valid_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

inline QAInstance parse_instance(const nlohmann::json& j, std::size_t line_no) {
    auto fail = [line_no](const std::string& what) -> ParseError {
        return ParseError("line " + std::to_string(line_no) + ": " + what);
    };
    if (!j.is_object()) throw fail("record is not an object");

    static const std::vector<std::string> known = {
        "id", "query", "context", "gold_answers", "gold_sufficiency", "timestamp"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            warn("line " + std::to_string(line_no) + ": ignoring unknown field \"" + it.key() + "\"");
        }
    }

    QAInstance inst;
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
        throw fail("missing or empty \"id\"");
    }
    inst.id = j["id"].get<std::string>();
    if (!j.contains("query") || !j["query"].is_string()) throw fail("missing \"query\"");
    inst.query = j["query"].get<std::string>();

    if (j.contains("context")) {
        if (!j["context"].is_array()) throw fail("\"context\" must be an array");
        for (const auto& dj : j["context"]) {
            if (!dj.is_object()) throw fail("context entry is not an object");
            static const std::vector<std::string> doc_known = {"title", "body", "source_url"};
            for (auto it = dj.begin(); it != dj.end(); ++it) {
                if (std::find(doc_known.begin(), doc_known.end(), it.key()) == doc_known.end()) {
                    warn("line " + std::to_string(line_no) + ": ignoring unknown context field \"" +
                         it.key() + "\"");
                }
            }
            ContextDocument doc;
            if (!dj.contains("body") || !dj["body"].is_string() ||
                dj["body"].get<std::string>().empty()) {
                throw fail("context document with missing or empty \"body\"");
            }
            doc.body = dj["body"].get<std::string>();
            if (dj.contains("title") && dj["title"].is_string()) {
                doc.title = dj["title"].get<std::string>();
            }
            if (dj.contains("source_url") && dj["source_url"].is_string()) {
                doc.source_url = dj["source_url"].get<std::string>();
            }
            inst.context.push_back(std::move(doc));
        }
    }

    if (!j.contains("gold_answers") || !j["gold_answers"].is_array() || j["gold_answers"].empty()) {
        throw fail("record for id \"" + inst.id + "\" has no gold_answers");
    }
    for (const auto& a : j["gold_answers"]) {
        if (!a.is_string()) throw fail("gold_answers entries must be strings");
        inst.gold_answers.push_back(a.get<std::string>());
    }

    if (j.contains("gold_sufficiency")) {
        if (!j["gold_sufficiency"].is_boolean()) throw fail("\"gold_sufficiency\" must be a boolean");
        inst.gold_sufficiency = j["gold_sufficiency"].get<bool>();
    }
    if (j.contains("timestamp")) {
        if (!j["timestamp"].is_string() || !valid_date(j["timestamp"].get<std::string>())) {
            throw fail("\"timestamp\" must be a YYYY-MM-DD date");
        }
        inst.timestamp = j["timestamp"].get<std::string>();
    }
    return inst;
}

}  // namespace detail

// Load a line-delimited dataset. `format` currently accepts only "jsonl".
// Record order is preserved; ids must be unique; every record must carry
// at least one gold answer.
inline Dataset load_dataset(const std::filesystem::path& path, const std::string& format = "jsonl") {
    if (format != "jsonl") throw ConfigError("unknown dataset format: " + format);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read dataset file: " + path.string());

    Dataset ds;
    ds.name = path.stem().string();
    std::map<std::string, std::size_t> seen_lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        QAInstance inst = detail::parse_instance(j, line_no);
        auto [it, inserted] = seen_lines.emplace(inst.id, line_no);
        if (!inserted) {
            throw ParseError("duplicate id \"" + inst.id + "\" on lines " +
                             std::to_string(it->second) + " and " + std::to_string(line_no));
        }
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

inline nlohmann::ordered_json instance_to_json(const QAInstance& inst) {
    nlohmann::ordered_json j;
    j["id"] = inst.id;
    j["query"] = inst.query;
    j["context"] = nlohmann::ordered_json::array();
    for (const ContextDocument& doc : inst.context) {
        nlohmann::ordered_json dj;
        if (doc.title) dj["title"] = *doc.title;
        dj["body"] = doc.body;
        if (doc.source_url) dj["source_url"] = *doc.source_url;
        j["context"].push_back(std::move(dj));
    }
    j["gold_answers"] = inst.gold_answers;
    if (inst.gold_sufficiency) j["gold_sufficiency"] = *inst.gold_sufficiency;
    if (inst.timestamp) j["timestamp"] = *inst.timestamp;
    return j;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset file: " + path.string());
    for (const QAInstance& inst : ds.instances) {
        out << instance_to_json(inst).dump() << "\n";
    }
    if (!out) throw Error("failed writing dataset file: " + path.string());
}

// Keep at most `budget` context tokens, in document order. The document
// straddling the budget is cut at the last whole token that fits; later
// documents are dropped. Token counts cover document bodies; titles are
// metadata and do not count toward the budget.
inline QAInstance truncate_context(const QAInstance& instance, std::size_t budget,
                                   const Tokenizer& tokenizer) {
    if (budget == 0) throw Error("truncate_context requires budget > 0");
    QAInstance out = instance;
    out.context.clear();
    std::size_t used = 0;
    for (const ContextDocument& doc : instance.context) {
        std::size_t doc_tokens = tokenizer.count(doc.body);
        if (used + doc_tokens <= budget) {
            out.context.push_back(doc);
            used += doc_tokens;
            continue;
        }
        std::size_t remaining = budget - used;
        if (remaining > 0) {
            std::string_view cut = tokenizer.prefix(doc.body, remaining);
            if (!cut.empty()) {
                ContextDocument shortened = doc;
                shortened.body = std::string(cut);
                out.context.push_back(std::move(shortened));
            }
        }
        break;  // later documents dropped
    }
    return out;
}

}  // namespace ragaudit
