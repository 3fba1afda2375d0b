#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragaudit/core.hpp"
#include "ragaudit/judge.hpp"
#include "ragaudit/sha256.hpp"

namespace ragaudit {

// Backend whose completions come from a lambda; the quickest way to script
// bespoke behavior (transport failures, seed-dependent text) in tests.
class CallbackBackend : public JudgeBackend {
  public:
    using Fn = std::function<std::string(const std::string& prompt, const Sampling& sampling)>;

    CallbackBackend(std::string name, std::size_t context_window, Fn fn)
        : name_(std::move(name)), window_(context_window), fn_(std::move(fn)) {}

    const std::string& name() const override { return name_; }
    std::size_t context_window() const override { return window_; }

    std::string complete(const std::string& prompt, const Sampling& sampling) override {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return fn_(prompt, sampling);
    }

    std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }

  private:
    std::string name_;
    std::size_t window_;
    Fn fn_;
    std::atomic<std::uint64_t> calls_{0};
};

// Deterministic mock driven by a JSON script: an ordered rule list where the
// first rule whose conditions all hold supplies the reply, with a default
// reply when none match. Conditions: prompt_contains (string or array, all
// must appear), seed_in (request seed must be listed), prompt_hash (hex
// sha-256 of the exact prompt).
class ScriptedBackend : public JudgeBackend {
  public:
    explicit ScriptedBackend(const nlohmann::json& script) {
        if (!script.is_object()) throw ConfigError("backend script must be a JSON object");
        name_ = script.value("name", std::string("scripted"));
        model_ = script.value("model", name_);
        window_ = script.value("context_window", std::size_t{1000000});
        if (!script.contains("default") || !script["default"].is_string()) {
            throw ConfigError("backend script needs a string 'default' reply");
        }
        default_reply_ = script["default"].get<std::string>();
        if (script.contains("rules")) {
            if (!script["rules"].is_array()) throw ConfigError("backend script 'rules' must be an array");
            for (const auto& r : script["rules"]) parse_rule(r);
        }
        for (const auto& [key, value] : script.items()) {
            if (key != "name" && key != "model" && key != "context_window" && key != "default" &&
                key != "rules") {
                warn("backend script: unknown field '" + key + "' ignored");
            }
        }
    }

    static ScriptedBackend from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read backend script: " + path.string());
        nlohmann::json script;
        try {
            in >> script;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("backend script " + path.string() + ": " + e.what());
        }
        return ScriptedBackend(script);
    }

    const std::string& name() const override { return name_; }
    const std::string& model() const override { return model_; }
    std::size_t context_window() const override { return window_; }

    std::string complete(const std::string& prompt, const Sampling& sampling) override {
        calls_.fetch_add(1, std::memory_order_relaxed);
        for (const Rule& rule : rules_) {
            if (matches(rule, prompt, sampling)) return rule.reply;
        }
        return default_reply_;
    }

    std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }

  private:
    struct Rule {
        std::vector<std::string> prompt_contains;
        std::vector<std::uint64_t> seed_in;
        std::string prompt_hash;  // lowercase hex, empty = unset
        std::string reply;
    };

    void parse_rule(const nlohmann::json& r) {
        if (!r.is_object()) throw ConfigError("backend script rule must be an object");
        Rule rule;
        if (r.contains("prompt_contains")) {
            const auto& pc = r["prompt_contains"];
            if (pc.is_string()) {
                rule.prompt_contains.push_back(pc.get<std::string>());
            } else if (pc.is_array()) {
                for (const auto& s : pc) {
                    if (!s.is_string()) throw ConfigError("prompt_contains entries must be strings");
                    rule.prompt_contains.push_back(s.get<std::string>());
                }
            } else {
                throw ConfigError("prompt_contains must be a string or array of strings");
            }
        }
        if (r.contains("seed_in")) {
            if (!r["seed_in"].is_array()) throw ConfigError("seed_in must be an array of integers");
            for (const auto& s : r["seed_in"]) {
                if (!s.is_number_unsigned() && !s.is_number_integer()) {
                    throw ConfigError("seed_in entries must be integers");
                }
                rule.seed_in.push_back(s.get<std::uint64_t>());
            }
        }
        if (r.contains("prompt_hash")) {
            if (!r["prompt_hash"].is_string()) throw ConfigError("prompt_hash must be a string");
            rule.prompt_hash = to_lower(r["prompt_hash"].get<std::string>());
        }
        if (!r.contains("reply") || !r["reply"].is_string()) {
            throw ConfigError("backend script rule needs a string 'reply'");
        }
        rule.reply = r["reply"].get<std::string>();
        rules_.push_back(std::move(rule));
    }

    static bool matches(const Rule& rule, const std::string& prompt, const Sampling& sampling) {
        for (const std::string& needle : rule.prompt_contains) {
            if (prompt.find(needle) == std::string::npos) return false;
        }
        if (!rule.seed_in.empty()) {
            if (!sampling.seed) return false;
            bool found = false;
            for (std::uint64_t s : rule.seed_in) {
                if (s == *sampling.seed) {
                    found = true;
                    break;
                }
            }
            if (!found) return false;
        }
        if (!rule.prompt_hash.empty()) {
            if (Sha256::hex_of(prompt) != rule.prompt_hash) return false;
        }
        return true;
    }

    std::string name_;
    std::string model_;
    std::size_t window_ = 0;
    std::string default_reply_;
    std::vector<Rule> rules_;
    std::atomic<std::uint64_t> calls_{0};
};

// Remote chat-completion backend. Sends OpenAI-style requests; the API key
// is read from the named environment variable at call time.
class HttpBackend : public JudgeBackend {
  public:
    struct Options {
        std::string name = "http";
        std::string base_url;  // e.g. "http://localhost:8080"
        std::string path = "/v1/chat/completions";
        std::string model;
        std::string api_key_env;  // empty = no Authorization header
        std::size_t context_window = 128000;
        int timeout_seconds = 120;
    };

    explicit HttpBackend(Options opt);

    const std::string& name() const override { return opt_.name; }
    const std::string& model() const override { return opt_.model; }
    std::size_t context_window() const override { return opt_.context_window; }
    std::string complete(const std::string& prompt, const Sampling& sampling) override;

  private:
    Options opt_;
};

// Probability that a context fragment entails the gold answer for a query.
class EntailmentScorer {
  public:
    virtual ~EntailmentScorer() = default;
    virtual const std::string& name() const = 0;
    // Returns a probability in [0,1].
    virtual double score(const std::string& chunk, const std::string& query,
                         const std::string& answer) = 0;
};

class CallbackEntailmentScorer : public EntailmentScorer {
  public:
    using Fn = std::function<double(const std::string&, const std::string&, const std::string&)>;

    CallbackEntailmentScorer(std::string name, Fn fn)
        : name_(std::move(name)), fn_(std::move(fn)) {}

    const std::string& name() const override { return name_; }
    double score(const std::string& chunk, const std::string& query,
                 const std::string& answer) override {
        return fn_(chunk, query, answer);
    }

  private:
    std::string name_;
    Fn fn_;
};

// JSON-scripted entailment probabilities, shaped like ScriptedBackend:
// first matching rule wins, all conditions in a rule are conjunctive.
class ScriptedEntailmentScorer : public EntailmentScorer {
  public:
    explicit ScriptedEntailmentScorer(const nlohmann::json& script) {
        if (!script.is_object()) throw ConfigError("scorer script must be a JSON object");
        name_ = script.value("name", std::string("scripted-entailment"));
        if (!script.contains("default") || !script["default"].is_number()) {
            throw ConfigError("scorer script needs a numeric 'default' score");
        }
        default_score_ = checked(script["default"].get<double>());
        if (script.contains("rules")) {
            if (!script["rules"].is_array()) throw ConfigError("scorer script 'rules' must be an array");
            for (const auto& r : script["rules"]) {
                Rule rule;
                if (r.contains("chunk_contains")) rule.chunk_contains = r["chunk_contains"].get<std::string>();
                if (r.contains("query_contains")) rule.query_contains = r["query_contains"].get<std::string>();
                if (r.contains("answer_contains")) rule.answer_contains = r["answer_contains"].get<std::string>();
                if (!r.contains("score") || !r["score"].is_number()) {
                    throw ConfigError("scorer script rule needs a numeric 'score'");
                }
                rule.score = checked(r["score"].get<double>());
                rules_.push_back(std::move(rule));
            }
        }
    }

    static ScriptedEntailmentScorer from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read scorer script: " + path.string());
        nlohmann::json script;
        try {
            in >> script;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("scorer script " + path.string() + ": " + e.what());
        }
        return ScriptedEntailmentScorer(script);
    }

    const std::string& name() const override { return name_; }

    double score(const std::string& chunk, const std::string& query,
                 const std::string& answer) override {
        for (const Rule& r : rules_) {
            if (!r.chunk_contains.empty() && chunk.find(r.chunk_contains) == std::string::npos) continue;
            if (!r.query_contains.empty() && query.find(r.query_contains) == std::string::npos) continue;
            if (!r.answer_contains.empty() && answer.find(r.answer_contains) == std::string::npos) continue;
            return r.score;
        }
        return default_score_;
    }

  private:
    struct Rule {
        std::string chunk_contains;
        std::string query_contains;
        std::string answer_contains;
        double score = 0.0;
    };

    static double checked(double p) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("entailment score must lie in [0,1]");
        return p;
    }

    std::string name_;
    double default_score_ = 0.0;
    std::vector<Rule> rules_;
};

}  // namespace ragaudit

// The HTTP transport lives out of line so only translation units that opt in
// pay for httplib.
#if defined(RAGAUDIT_ENABLE_HTTP)
#include <httplib.h>

namespace ragaudit {

inline HttpBackend::HttpBackend(Options opt) : opt_(std::move(opt)) {
    if (opt_.base_url.empty()) throw ConfigError("http backend needs a base_url");
    if (opt_.model.empty()) throw ConfigError("http backend needs a model name");
}

inline std::string HttpBackend::complete(const std::string& prompt, const Sampling& sampling) {
    httplib::Client client(opt_.base_url);
    client.set_read_timeout(opt_.timeout_seconds, 0);
    client.set_connection_timeout(opt_.timeout_seconds, 0);

    nlohmann::json body = {
        {"model", opt_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", sampling.temperature},
        {"max_tokens", sampling.max_output_tokens},
    };
    if (sampling.seed) body["seed"] = *sampling.seed;

    httplib::Headers headers;
    if (!opt_.api_key_env.empty()) {
        const char* key = std::getenv(opt_.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw ConfigError("environment variable " + opt_.api_key_env + " is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto res = client.Post(opt_.path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportError("http backend '" + opt_.name + "': connection failed");
    }
    if (res->status != 200) {
        throw TransportError("http backend '" + opt_.name + "': status " +
                             std::to_string(res->status));
    }
    try {
        nlohmann::json reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError("http backend '" + opt_.name + "': malformed reply: " + e.what());
    }
}

}  // namespace ragaudit
#else

namespace ragaudit {

inline HttpBackend::HttpBackend(Options opt) : opt_(std::move(opt)) {
    throw ConfigError("http backend support is not compiled in (RAGAUDIT_ENABLE_HTTP)");
}

inline std::string HttpBackend::complete(const std::string&, const Sampling&) {
    throw ConfigError("http backend support is not compiled in (RAGAUDIT_ENABLE_HTTP)");
}

}  // namespace ragaudit
#endif
