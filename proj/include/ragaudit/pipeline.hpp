#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ragaudit/artifacts.hpp"
#include "ragaudit/backends.hpp"
#include "ragaudit/cache.hpp"
#include "ragaudit/client.hpp"
#include "ragaudit/dataset.hpp"
#include "ragaudit/judge.hpp"
#include "ragaudit/predictor.hpp"
#include "ragaudit/report.hpp"
#include "ragaudit/selective.hpp"
#include "ragaudit/signals.hpp"
#include "ragaudit/sufficiency.hpp"
#include "ragaudit/templates.hpp"
#include "ragaudit/tokenizer.hpp"

namespace ragaudit {

struct BackendConfig {
    std::string kind = "scripted";  // "scripted" | "http"
    std::string script;             // scripted: path to the JSON script
    std::string name;               // optional override
    std::string model;              // optional override
    std::string base_url;           // http only
    std::string http_path = "/v1/chat/completions";
    std::string api_key_env;
    std::size_t context_window = 0;  // 0 = keep the backend's own default
};

// Everything a stage run depends on. cache_dir, out_dir, and parallelism are
// excluded from the config digest: they change where work happens and how
// fast, never what is computed.
struct RunConfig {
    std::string dataset;
    std::string cache_dir;  // empty = uncached
    std::string out_dir = "out";
    std::string templates_dir;  // empty = built-in templates
    std::string tokenizer_id = "approx8";
    std::size_t chunk_size = 1600;
    bool preserve_structure = true;
    std::size_t budget = 0;  // 0 = no context truncation
    std::string rater = "chunked";
    double entailment_threshold = kDefaultEntailmentThreshold;
    std::string scorer_script;  // entailment_threshold rater only
    std::string confidence = "p_true";
    int n_samples = 20;
    int n_ratings = 5;
    double sample_temperature = 1.0;
    bool chain_of_thought = true;
    bool open_book = true;
    std::uint64_t seed = 0;
    int search_iters = 100;
    int parallelism = 1;
    std::string model_label;    // empty = generator backend name
    std::string dataset_label;  // empty = dataset file stem
    std::vector<std::string> extra_abstentions;
    BackendConfig generator;
    BackendConfig autorater;
    BackendConfig evaluator;
};

namespace detail {

inline std::string json_string(const nlohmann::json& j, const std::string& key,
                               const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) throw ConfigError("config field '" + key + "' must be a string");
    return j[key].get<std::string>();
}

template <typename T>
inline T json_number(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError("config field '" + key + "' must be a number");
    return j[key].get<T>();
}

inline bool json_bool(const nlohmann::json& j, const std::string& key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ConfigError("config field '" + key + "' must be a boolean");
    return j[key].get<bool>();
}

inline BackendConfig backend_from_json(const nlohmann::json& j, const std::string& role) {
    if (!j.is_object()) throw ConfigError("backend config '" + role + "' must be an object");
    BackendConfig b;
    b.kind = json_string(j, "kind", b.kind);
    b.script = json_string(j, "script", b.script);
    b.name = json_string(j, "name", b.name);
    b.model = json_string(j, "model", b.model);
    b.base_url = json_string(j, "base_url", b.base_url);
    b.http_path = json_string(j, "path", b.http_path);
    b.api_key_env = json_string(j, "api_key_env", b.api_key_env);
    b.context_window = json_number<std::size_t>(j, "context_window", b.context_window);
    return b;
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    c.dataset = detail::json_string(j, "dataset", c.dataset);
    c.cache_dir = detail::json_string(j, "cache_dir", c.cache_dir);
    c.out_dir = detail::json_string(j, "out_dir", c.out_dir);
    c.templates_dir = detail::json_string(j, "templates_dir", c.templates_dir);
    c.tokenizer_id = detail::json_string(j, "tokenizer", c.tokenizer_id);
    c.chunk_size = detail::json_number<std::size_t>(j, "chunk_size", c.chunk_size);
    c.preserve_structure = detail::json_bool(j, "preserve_structure", c.preserve_structure);
    c.budget = detail::json_number<std::size_t>(j, "budget", c.budget);
    c.rater = detail::json_string(j, "rater", c.rater);
    c.entailment_threshold =
        detail::json_number<double>(j, "entailment_threshold", c.entailment_threshold);
    c.scorer_script = detail::json_string(j, "scorer_script", c.scorer_script);
    c.confidence = detail::json_string(j, "confidence", c.confidence);
    c.n_samples = detail::json_number<int>(j, "n_samples", c.n_samples);
    c.n_ratings = detail::json_number<int>(j, "n_ratings", c.n_ratings);
    c.sample_temperature = detail::json_number<double>(j, "sample_temperature", c.sample_temperature);
    c.chain_of_thought = detail::json_bool(j, "chain_of_thought", c.chain_of_thought);
    c.open_book = detail::json_bool(j, "open_book", c.open_book);
    c.seed = detail::json_number<std::uint64_t>(j, "seed", c.seed);
    c.search_iters = detail::json_number<int>(j, "search_iters", c.search_iters);
    c.parallelism = detail::json_number<int>(j, "parallelism", c.parallelism);
    c.model_label = detail::json_string(j, "model_label", c.model_label);
    c.dataset_label = detail::json_string(j, "dataset_label", c.dataset_label);
    if (j.contains("extra_abstentions")) {
        if (!j["extra_abstentions"].is_array()) {
            throw ConfigError("config field 'extra_abstentions' must be an array of strings");
        }
        for (const auto& e : j["extra_abstentions"]) {
            if (!e.is_string()) throw ConfigError("extra_abstentions entries must be strings");
            c.extra_abstentions.push_back(e.get<std::string>());
        }
    }
    if (j.contains("backends")) {
        const auto& b = j["backends"];
        if (!b.is_object()) throw ConfigError("config field 'backends' must be an object");
        if (b.contains("generator")) c.generator = detail::backend_from_json(b["generator"], "generator");
        if (b.contains("autorater")) c.autorater = detail::backend_from_json(b["autorater"], "autorater");
        if (b.contains("evaluator")) c.evaluator = detail::backend_from_json(b["evaluator"], "evaluator");
        for (const auto& [role, value] : b.items()) {
            (void)value;
            if (role != "generator" && role != "autorater" && role != "evaluator") {
                warn("config: unknown backend role '" + role + "' ignored");
            }
        }
    }
    static const std::vector<std::string> known = {
        "dataset", "cache_dir", "out_dir", "templates_dir", "tokenizer", "chunk_size",
        "preserve_structure", "budget", "rater", "entailment_threshold", "scorer_script",
        "confidence", "n_samples", "n_ratings", "sample_temperature", "chain_of_thought",
        "open_book", "seed", "search_iters", "parallelism", "model_label", "dataset_label",
        "extra_abstentions", "backends"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const std::string& k : known) {
            if (k == key) {
                ok = true;
                break;
            }
        }
        if (!ok) warn("config: unknown field '" + key + "' ignored");
    }
    if (c.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (c.chunk_size < 1) throw ConfigError("chunk_size must be >= 1");
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

// Field overrides in "--backend.<role>.<field> value" form.
inline void apply_backend_override(RunConfig& config, const std::string& role,
                                   const std::string& field, const std::string& value) {
    BackendConfig* b = nullptr;
    if (role == "generator") b = &config.generator;
    else if (role == "autorater") b = &config.autorater;
    else if (role == "evaluator") b = &config.evaluator;
    else throw ConfigError("unknown backend role: '" + role + "'");

    if (field == "kind") b->kind = value;
    else if (field == "script") b->script = value;
    else if (field == "name") b->name = value;
    else if (field == "model") b->model = value;
    else if (field == "base_url") b->base_url = value;
    else if (field == "path") b->http_path = value;
    else if (field == "api_key_env") b->api_key_env = value;
    else if (field == "context_window") {
        try {
            b->context_window = std::stoull(value);
        } catch (const std::exception&) {
            throw ConfigError("context_window override must be an integer, got '" + value + "'");
        }
    } else {
        throw ConfigError("unknown backend field: '" + field + "'");
    }
}

namespace detail {

inline nlohmann::ordered_json backend_digest_json(const BackendConfig& b) {
    nlohmann::ordered_json j;
    j["kind"] = b.kind;
    j["script"] = b.script;
    j["name"] = b.name;
    j["model"] = b.model;
    j["base_url"] = b.base_url;
    j["path"] = b.http_path;
    j["api_key_env"] = b.api_key_env;
    j["context_window"] = b.context_window;
    return j;
}

}  // namespace detail

// Digest of everything that determines stage outputs. Template texts are
// hashed (not the directory path), so moving an identical template set does
// not change the digest, while editing a template does. cache_dir, out_dir,
// and parallelism stay out on purpose.
inline std::string config_digest(const RunConfig& c, const TemplateCatalog& catalog) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["dataset"] = c.dataset;
    j["tokenizer"] = c.tokenizer_id;
    j["chunk_size"] = c.chunk_size;
    j["preserve_structure"] = c.preserve_structure;
    j["budget"] = c.budget;
    j["rater"] = c.rater;
    j["entailment_threshold"] = c.entailment_threshold;
    j["scorer_script"] = c.scorer_script;
    j["confidence"] = c.confidence;
    j["n_samples"] = c.n_samples;
    j["n_ratings"] = c.n_ratings;
    j["sample_temperature"] = c.sample_temperature;
    j["chain_of_thought"] = c.chain_of_thought;
    j["open_book"] = c.open_book;
    j["seed"] = c.seed;
    j["search_iters"] = c.search_iters;
    j["model_label"] = c.model_label;
    j["dataset_label"] = c.dataset_label;
    j["extra_abstentions"] = c.extra_abstentions;
    j["generator"] = detail::backend_digest_json(c.generator);
    j["autorater"] = detail::backend_digest_json(c.autorater);
    j["evaluator"] = detail::backend_digest_json(c.evaluator);
    Sha256 templates_hash;
    for (TemplateId id : all_template_ids()) {
        templates_hash.update(std::string_view(to_string(id)));
        templates_hash.update(std::string_view("\0", 1));
        templates_hash.update(catalog.text(id));
        templates_hash.update(std::string_view("\0", 1));
    }
    j["templates"] = Sha256::hex(templates_hash.finish());
    return Sha256::hex_of(j.dump());
}

inline std::unique_ptr<JudgeBackend> make_backend(const BackendConfig& config,
                                                  const std::string& role) {
    if (config.kind == "scripted") {
        if (config.script.empty()) {
            throw ConfigError("backend '" + role + "' needs a script path (kind=scripted)");
        }
        std::ifstream in(config.script);
        if (!in) {
            throw ConfigError("backend '" + role + "': cannot read script " + config.script);
        }
        nlohmann::json script;
        try {
            in >> script;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("backend '" + role + "' script: " + e.what());
        }
        if (!config.name.empty()) script["name"] = config.name;
        if (!config.model.empty()) script["model"] = config.model;
        if (config.context_window != 0) script["context_window"] = config.context_window;
        return std::make_unique<ScriptedBackend>(script);
    }
    if (config.kind == "http") {
        HttpBackend::Options opt;
        opt.name = config.name.empty() ? role : config.name;
        opt.base_url = config.base_url;
        opt.path = config.http_path;
        opt.model = config.model;
        opt.api_key_env = config.api_key_env;
        if (config.context_window != 0) opt.context_window = config.context_window;
        return std::make_unique<HttpBackend>(std::move(opt));
    }
    throw ConfigError("backend '" + role + "': unknown kind '" + config.kind + "'");
}

namespace detail {

// Index-parallel driver. Results must be written by index so output order
// never depends on scheduling; the first exception is rethrown after all
// workers join.
template <typename Fn>
inline void parallel_for(std::size_t n, int parallelism, Fn&& fn) {
    if (n == 0) return;
    std::size_t workers = static_cast<std::size_t>(parallelism);
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    workers = std::min(workers, n);
    std::atomic<std::size_t> next{0};
    std::mutex error_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            {
                std::lock_guard<std::mutex> guard(error_mu);
                if (first_error) return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> guard(error_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline void write_stage_stats(const std::filesystem::path& path, nlohmann::ordered_json stats) {
    std::ofstream out = open_for_write(path);
    out << stats.dump(2) << '\n';
}

inline void require_stage_file(const std::filesystem::path& path, const std::string& stage) {
    if (!std::filesystem::exists(path)) {
        throw MissingInputError("missing " + path.string() + "; run " + stage + " first");
    }
}

}  // namespace detail

// Shared per-stage machinery: catalog, tokenizer, cache, client, digest, and
// the dataset with the configured token budget applied.
struct StageContext {
    RunConfig config;
    TemplateCatalog catalog;
    std::shared_ptr<const Tokenizer> tokenizer;
    std::shared_ptr<CompletionCache> cache;
    std::unique_ptr<JudgeClient> client;
    std::string digest;

    explicit StageContext(RunConfig cfg) : config(std::move(cfg)) {
        catalog = config.templates_dir.empty() ? TemplateCatalog()
                                               : TemplateCatalog(config.templates_dir);
        tokenizer = make_tokenizer(config.tokenizer_id);
        if (!config.cache_dir.empty()) {
            cache = std::make_shared<CompletionCache>(config.cache_dir);
        }
        JudgeClient::Options opt;
        opt.catalog = catalog;
        opt.cache = cache;
        opt.tokenizer = tokenizer;
        client = std::make_unique<JudgeClient>(std::move(opt));
        digest = config_digest(config, catalog);
    }

    Dataset dataset() const {
        if (config.dataset.empty()) throw ConfigError("no dataset path configured");
        Dataset data = load_dataset(config.dataset);
        if (config.budget > 0) {
            for (QAInstance& instance : data.instances) {
                instance = truncate_context(instance, config.budget, *tokenizer);
            }
        }
        return data;
    }

    std::filesystem::path out(const std::string& leaf) const {
        return std::filesystem::path(config.out_dir) / leaf;
    }
};

// ---- label ------------------------------------------------------------------

struct LabelResult {
    std::size_t n = 0;
    std::size_t n_sufficient = 0;
    RaterStats rater_stats;
    ClientStatsSnapshot client_stats;
};

inline LabelResult run_label(const RunConfig& config) {
    StageContext ctx(config);
    Dataset data = ctx.dataset();
    RaterKind kind = rater_kind_from_string(config.rater);

    std::unique_ptr<JudgeBackend> backend;
    std::unique_ptr<EntailmentScorer> scorer;
    if (kind == RaterKind::FULL_0SHOT || kind == RaterKind::FULL_1SHOT ||
        kind == RaterKind::CHUNKED) {
        backend = make_backend(config.autorater, "autorater");
    } else if (kind == RaterKind::ENTAILMENT_THRESHOLD) {
        if (config.scorer_script.empty()) {
            throw ConfigError("rater entailment_threshold needs scorer_script");
        }
        scorer = std::make_unique<ScriptedEntailmentScorer>(
            ScriptedEntailmentScorer::from_file(config.scorer_script));
    }

    std::vector<SufficiencyVerdict> verdicts(data.instances.size());
    std::vector<RaterStats> stats(data.instances.size());
    detail::parallel_for(data.instances.size(), config.parallelism, [&](std::size_t i) {
        const QAInstance& instance = data.instances[i];
        switch (kind) {
            case RaterKind::FULL_0SHOT:
                verdicts[i] = rate_full(instance, *ctx.client, *backend, Shots::Zero, &stats[i]);
                break;
            case RaterKind::FULL_1SHOT:
                verdicts[i] = rate_full(instance, *ctx.client, *backend, Shots::One, &stats[i]);
                break;
            case RaterKind::CHUNKED:
                verdicts[i] = rate_chunked(instance, *ctx.client, *backend, config.chunk_size,
                                           config.preserve_structure, &stats[i]);
                break;
            case RaterKind::CONTAINS_GT:
                verdicts[i] = contains_gt(instance);
                break;
            case RaterKind::ENTAILMENT_THRESHOLD:
                verdicts[i] = entailment_rate(instance, *scorer, *ctx.tokenizer,
                                              config.entailment_threshold, config.chunk_size,
                                              config.preserve_structure);
                break;
        }
    });

    LabelResult result;
    result.n = verdicts.size();
    for (const SufficiencyVerdict& v : verdicts) {
        if (v.sufficient) ++result.n_sufficient;
    }
    for (const RaterStats& s : stats) {
        result.rater_stats.rated += s.rated;
        result.rater_stats.parse_failures += s.parse_failures;
        result.rater_stats.chunk_votes_cast += s.chunk_votes_cast;
    }
    save_verdicts(ctx.out("verdicts.jsonl"), verdicts);

    nlohmann::ordered_json stage_stats;
    stage_stats["stage"] = "label";
    stage_stats["config_digest"] = ctx.digest;
    stage_stats["seed"] = config.seed;
    stage_stats["rater"] = config.rater;
    stage_stats["n"] = result.n;
    stage_stats["sufficient"] = result.n_sufficient;
    stage_stats["sufficient_pct"] =
        result.n == 0 ? 0.0
                      : detail::pct_one_decimal(result.n_sufficient, result.n);
    stage_stats["parse_failures"] = result.rater_stats.parse_failures;
    stage_stats["chunk_votes_cast"] = result.rater_stats.chunk_votes_cast;
    detail::write_stage_stats(ctx.out("label_stats.json"), std::move(stage_stats));

    result.client_stats = ctx.client->stats();
    return result;
}

// ---- answer -----------------------------------------------------------------

struct AnswerResult {
    std::size_t n = 0;
    std::size_t n_correct = 0;
    std::size_t n_abstain = 0;
    std::size_t n_hallucinate = 0;
    ReportStats report_stats;
    ClientStatsSnapshot client_stats;
};

inline AnswerResult run_answer(const RunConfig& config) {
    StageContext ctx(config);
    Dataset data = ctx.dataset();
    std::unique_ptr<JudgeBackend> generator = make_backend(config.generator, "generator");
    std::unique_ptr<JudgeBackend> evaluator = make_backend(config.evaluator, "evaluator");

    std::vector<ResponseRecord> records(data.instances.size());
    std::vector<ReportStats> stats(data.instances.size());
    detail::parallel_for(data.instances.size(), config.parallelism, [&](std::size_t i) {
        const QAInstance& instance = data.instances[i];
        JudgeRequest request;
        request.template_id = config.chain_of_thought ? TemplateId::QA_COT
                                                      : TemplateId::QA_ANSWER_ONLY;
        request.slots = {
            {"question", instance.query},
            {"references", config.open_book ? flatten_context(instance.context) : std::string()}};
        RawCompletion completion = ctx.client->complete(*generator, request);
        records[i] = rate_response(instance, completion.text, *ctx.client, *evaluator,
                                   config.extra_abstentions, &stats[i]);
    });

    AnswerResult result;
    result.n = records.size();
    for (const ResponseRecord& r : records) {
        switch (r.rating) {
            case Rating::Correct: ++result.n_correct; break;
            case Rating::Abstain: ++result.n_abstain; break;
            case Rating::Hallucinate: ++result.n_hallucinate; break;
        }
    }
    for (const ReportStats& s : stats) {
        result.report_stats.rated += s.rated;
        result.report_stats.abstain_rule += s.abstain_rule;
        result.report_stats.lexical += s.lexical;
        result.report_stats.llmeval_calls += s.llmeval_calls;
        result.report_stats.parse_failures += s.parse_failures;
    }
    save_responses(ctx.out("responses.jsonl"), records);

    nlohmann::ordered_json stage_stats;
    stage_stats["stage"] = "answer";
    stage_stats["config_digest"] = ctx.digest;
    stage_stats["seed"] = config.seed;
    stage_stats["open_book"] = config.open_book;
    stage_stats["chain_of_thought"] = config.chain_of_thought;
    stage_stats["n"] = result.n;
    stage_stats["correct"] = result.n_correct;
    stage_stats["abstain"] = result.n_abstain;
    stage_stats["hallucinate"] = result.n_hallucinate;
    stage_stats["rated_by_abstain_rule"] = result.report_stats.abstain_rule;
    stage_stats["rated_by_lexical"] = result.report_stats.lexical;
    stage_stats["rated_by_llmeval"] = result.report_stats.llmeval_calls;
    stage_stats["parse_failures"] = result.report_stats.parse_failures;
    detail::write_stage_stats(ctx.out("answer_stats.json"), std::move(stage_stats));

    result.client_stats = ctx.client->stats();
    return result;
}

// ---- signals ----------------------------------------------------------------

struct SignalsResult {
    std::size_t n = 0;
    std::size_t n_abstained = 0;
    SignalStats signal_stats;
    ClientStatsSnapshot client_stats;
};

inline SignalsResult run_signals(const RunConfig& config) {
    StageContext ctx(config);
    detail::require_stage_file(ctx.out("verdicts.jsonl"), "label");
    Dataset data = ctx.dataset();
    std::vector<SufficiencyVerdict> verdicts = load_verdicts(ctx.out("verdicts.jsonl"));
    ConfidenceKind kind = confidence_kind_from_string(config.confidence);
    std::unique_ptr<JudgeBackend> generator = make_backend(config.generator, "generator");

    PTrueOptions p_true_options;
    p_true_options.n_samples = config.n_samples;
    p_true_options.n_ratings = config.n_ratings;
    p_true_options.temperature = config.sample_temperature;
    p_true_options.chain_of_thought = config.chain_of_thought;
    p_true_options.extra_abstentions = config.extra_abstentions;
    PCorrectOptions p_correct_options;
    p_correct_options.extra_abstentions = config.extra_abstentions;

    std::vector<SignalRecord> records(data.instances.size());
    std::vector<SignalStats> stats(data.instances.size());
    detail::parallel_for(data.instances.size(), config.parallelism, [&](std::size_t i) {
        const QAInstance& instance = data.instances[i];
        if (kind == ConfidenceKind::P_TRUE) {
            // Self-rating: the generator grades its own modal answer.
            records[i] =
                p_true(instance, *ctx.client, *generator, *generator, p_true_options, &stats[i]);
        } else {
            records[i] = p_correct(instance, *ctx.client, *generator, p_correct_options, &stats[i]);
        }
    });

    std::vector<SignalRecord> merged = assemble_signals(verdicts, records);
    save_signals(ctx.out("signals.jsonl"), merged);

    SignalsResult result;
    result.n = merged.size();
    for (const SignalRecord& r : merged) {
        if (r.abstained) ++result.n_abstained;
    }
    for (const SignalStats& s : stats) {
        result.signal_stats.instances += s.instances;
        result.signal_stats.samples_drawn += s.samples_drawn;
        result.signal_stats.ratings_drawn += s.ratings_drawn;
        result.signal_stats.parse_failures += s.parse_failures;
        result.signal_stats.probabilities_clamped += s.probabilities_clamped;
    }

    nlohmann::ordered_json stage_stats;
    stage_stats["stage"] = "signals";
    stage_stats["config_digest"] = ctx.digest;
    stage_stats["seed"] = config.seed;
    stage_stats["confidence_kind"] = config.confidence;
    stage_stats["n"] = result.n;
    stage_stats["abstained"] = result.n_abstained;
    stage_stats["samples_drawn"] = result.signal_stats.samples_drawn;
    stage_stats["ratings_drawn"] = result.signal_stats.ratings_drawn;
    stage_stats["parse_failures"] = result.signal_stats.parse_failures;
    stage_stats["probabilities_clamped"] = result.signal_stats.probabilities_clamped;
    detail::write_stage_stats(ctx.out("signal_stats.json"), std::move(stage_stats));

    result.client_stats = ctx.client->stats();
    return result;
}

// ---- train ------------------------------------------------------------------

// Training rows pair each signal with its response rating: hallucinations are
// the positive class, abstentions are excluded (the gate's job is deciding
// whether to release an answer, not re-predicting abstention).
inline std::vector<TrainingExample> make_training_set(
    const std::vector<SignalRecord>& signals, const std::map<std::string, Rating>& ratings,
    std::size_t* n_excluded = nullptr) {
    std::vector<TrainingExample> examples;
    std::size_t excluded = 0;
    for (const SignalRecord& record : signals) {
        auto it = ratings.find(record.instance_id);
        if (it == ratings.end()) {
            throw MissingInputError("no response rating for instance '" + record.instance_id +
                                    "'");
        }
        if (it->second == Rating::Abstain) {
            ++excluded;
            continue;
        }
        TrainingExample ex;
        ex.features = features_of(record);
        ex.label = (it->second == Rating::Hallucinate);
        examples.push_back(ex);
    }
    if (n_excluded != nullptr) *n_excluded = excluded;
    return examples;
}

inline std::map<std::string, Rating> ratings_by_id(const std::vector<ResponseRecord>& records) {
    std::map<std::string, Rating> ratings;
    for (const ResponseRecord& r : records) ratings[r.instance_id] = r.rating;
    return ratings;
}

struct TrainResult {
    std::size_t n_examples = 0;
    std::size_t n_excluded = 0;
    LogisticModel combined;
    LogisticModel confidence_only;
    RandomSearchReport combined_report;
    RandomSearchReport confidence_only_report;
};

inline TrainResult run_train(const RunConfig& config) {
    StageContext ctx(config);
    detail::require_stage_file(ctx.out("signals.jsonl"), "signals");
    detail::require_stage_file(ctx.out("responses.jsonl"), "answer");
    std::vector<SignalRecord> signals = load_signals(ctx.out("signals.jsonl"));
    std::map<std::string, Rating> ratings = ratings_by_id(load_responses(ctx.out("responses.jsonl")));

    TrainResult result;
    std::vector<TrainingExample> examples = make_training_set(signals, ratings, &result.n_excluded);
    result.n_examples = examples.size();

    result.combined = random_search(examples, config.search_iters, config.seed, true,
                                    &result.combined_report);
    result.confidence_only = random_search(examples, config.search_iters, config.seed, false,
                                           &result.confidence_only_report);
    save_model(ctx.out("model.json"), result.combined, ctx.digest);
    save_model(ctx.out("model_confidence_only.json"), result.confidence_only, ctx.digest);

    auto report_json = [](const LogisticModel& m, const RandomSearchReport& r) {
        nlohmann::ordered_json j;
        j["l2_lambda"] = m.hyperparams.l2_lambda;
        j["learning_rate"] = m.hyperparams.learning_rate;
        j["epochs"] = m.hyperparams.epochs;
        j["best_candidate"] = r.best_index;
        j["best_val_loss"] = r.best_val_loss;
        j["val_accuracy"] = r.val_accuracy;
        j["final_loss"] = m.final_loss;
        return j;
    };
    nlohmann::ordered_json stage_stats;
    stage_stats["stage"] = "train";
    stage_stats["config_digest"] = ctx.digest;
    stage_stats["seed"] = config.seed;
    stage_stats["search_iters"] = config.search_iters;
    stage_stats["n_signals"] = signals.size();
    stage_stats["n_examples"] = result.n_examples;
    stage_stats["n_abstain_excluded"] = result.n_excluded;
    stage_stats["n_train"] = result.combined_report.n_train;
    stage_stats["n_val"] = result.combined_report.n_val;
    stage_stats["combined"] = report_json(result.combined, result.combined_report);
    stage_stats["confidence_only"] =
        report_json(result.confidence_only, result.confidence_only_report);
    detail::write_stage_stats(ctx.out("train_stats.json"), std::move(stage_stats));
    return result;
}

// ---- curve ------------------------------------------------------------------

struct CurveResult {
    CoverageCurve combined;
    CoverageCurve confidence_only;
    std::vector<CurveDelta> deltas;
};

inline CurveResult run_curve(const RunConfig& config) {
    StageContext ctx(config);
    detail::require_stage_file(ctx.out("signals.jsonl"), "signals");
    detail::require_stage_file(ctx.out("responses.jsonl"), "answer");
    detail::require_stage_file(ctx.out("model.json"), "train");
    detail::require_stage_file(ctx.out("model_confidence_only.json"), "train");

    std::vector<SignalRecord> signals = load_signals(ctx.out("signals.jsonl"));
    std::map<std::string, Rating> ratings = ratings_by_id(load_responses(ctx.out("responses.jsonl")));
    LogisticModel combined = load_model(ctx.out("model.json"));
    LogisticModel confidence_only = load_model(ctx.out("model_confidence_only.json"));

    CurveResult result;
    result.combined = coverage_curve(signals, ratings, combined);
    result.confidence_only = coverage_curve(signals, ratings, confidence_only);

    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(static_cast<double>(i) / 20.0);
    result.deltas = compare_curves(result.combined, result.confidence_only, grid);

    save_curve_csv(ctx.out("curve_combined.csv"), result.combined);
    save_curve_json(ctx.out("curve_combined.json"), result.combined, ctx.digest);
    save_curve_csv(ctx.out("curve_confidence_only.csv"), result.confidence_only);
    save_curve_json(ctx.out("curve_confidence_only.json"), result.confidence_only, ctx.digest);
    {
        std::ofstream out = detail::open_for_write(ctx.out("curve_delta.csv"));
        out << "coverage,delta_accuracy\n";
        for (const CurveDelta& d : result.deltas) {
            out << detail::format_double(d.coverage) << ','
                << detail::format_double(d.delta_accuracy) << '\n';
        }
    }

    nlohmann::ordered_json stage_stats;
    stage_stats["stage"] = "curve";
    stage_stats["config_digest"] = ctx.digest;
    stage_stats["seed"] = config.seed;
    stage_stats["n_signals"] = signals.size();
    stage_stats["combined_points"] = result.combined.points.size();
    stage_stats["confidence_only_points"] = result.confidence_only.points.size();
    stage_stats["delta_points"] = result.deltas.size();
    detail::write_stage_stats(ctx.out("curve_stats.json"), std::move(stage_stats));
    return result;
}

// ---- report -----------------------------------------------------------------

struct ReportResult {
    std::vector<StratifiedBreakdown> breakdowns;
    std::map<std::string, RaterMetrics> rater_metrics;
    std::filesystem::path report_dir;
};

inline ReportResult run_report(const RunConfig& config) {
    StageContext ctx(config);
    detail::require_stage_file(ctx.out("responses.jsonl"), "answer");
    detail::require_stage_file(ctx.out("verdicts.jsonl"), "label");
    std::vector<ResponseRecord> responses = load_responses(ctx.out("responses.jsonl"));
    std::vector<SufficiencyVerdict> verdicts = load_verdicts(ctx.out("verdicts.jsonl"));

    ReportResult result;
    result.breakdowns = stratify(responses, verdicts);

    // Rater quality against gold labels, when the dataset carries them.
    Dataset data = ctx.dataset();
    std::map<std::string, bool> gold;
    for (const QAInstance& instance : data.instances) {
        if (instance.gold_sufficiency) gold[instance.id] = *instance.gold_sufficiency;
    }
    if (!gold.empty()) {
        std::vector<SufficiencyVerdict> scored;
        for (const SufficiencyVerdict& v : verdicts) {
            if (gold.count(v.instance_id) > 0) scored.push_back(v);
        }
        if (!scored.empty()) {
            result.rater_metrics[to_string(scored.front().rater)] = score_rater(scored, gold);
        }
    }

    std::map<std::string, CoverageCurve> curves;
    for (const char* name : {"curve_combined", "curve_confidence_only"}) {
        std::filesystem::path path = ctx.out(std::string(name) + ".json");
        if (std::filesystem::exists(path)) curves[name] = load_curve_json(path);
    }

    ReportLabels labels;
    labels.model = config.model_label;
    if (labels.model.empty()) {
        labels.model = config.generator.name.empty() ? "generator" : config.generator.name;
    }
    labels.dataset = config.dataset_label.empty() ? data.name : config.dataset_label;

    result.report_dir = ctx.out("report");
    emit_report(result.report_dir, result.breakdowns, curves, result.rater_metrics, labels,
                ctx.digest);
    return result;
}

}  // namespace ragaudit
