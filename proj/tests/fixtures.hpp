#pragma once

// Shared test scaffolding: a self-cleaning temp dir, small dataset builders,
// and the five-class synthetic corpus + scripted backends used by the
// pipeline and acceptance tests.
//
// The five behavior classes (40 instances each by default), keyed by a tag
// embedded in every question:
//   alpha    sufficient context, correct answer, self-rated confidence 1.0
//   beta     sufficient context, hallucinated answer, confidence 0.4
//   gamma    insufficient context, abstains, confidence 0.0
//   delta    insufficient context, hallucinated answer, confidence 0.2
//   epsilon  insufficient context, correct answer anyway, confidence 0.8
// Sufficient contexts carry the token "suffmark" for the scripted autorater.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragaudit/dataset.hpp"
#include "ragaudit/pipeline.hpp"

namespace testkit {

class TempDir {
  public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        for (int attempt = 0; attempt < 100; ++attempt) {
            std::filesystem::path candidate =
                base / ("ragaudit-test-" + std::to_string(rd()) + "-" + std::to_string(attempt));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("could not create a temp directory");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

  private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline ragaudit::QAInstance make_instance(std::string id, std::string query, std::string body,
                                          std::vector<std::string> gold) {
    ragaudit::QAInstance inst;
    inst.id = std::move(id);
    inst.query = std::move(query);
    if (!body.empty()) {
        ragaudit::ContextDocument doc;
        doc.body = std::move(body);
        inst.context.push_back(std::move(doc));
    }
    inst.gold_answers = std::move(gold);
    return inst;
}

struct SyntheticClass {
    const char* tag;
    bool sufficient;
    const char* answer;       // gold answer
    const char* reply;        // generator reply to QA prompts
    int true_ratings;         // of 5 self-ratings
};

inline const std::vector<SyntheticClass>& synthetic_classes() {
    static const std::vector<SyntheticClass> classes = {
        {"alpha", true, "answer-alpha", "The answer is: answer-alpha.", 5},
        {"beta", true, "answer-beta", "The answer is: wrong-beta.", 2},
        {"gamma", false, "answer-gamma", "The answer is: I don't know.", 0},
        {"delta", false, "answer-delta", "The answer is: wrong-delta.", 1},
        {"epsilon", false, "answer-epsilon", "The answer is: answer-epsilon.", 4},
    };
    return classes;
}

inline std::vector<ragaudit::QAInstance> make_synthetic_instances(int n_per_class) {
    std::vector<ragaudit::QAInstance> instances;
    int serial = 0;
    for (int i = 0; i < n_per_class; ++i) {
        for (const SyntheticClass& cls : synthetic_classes()) {
            ragaudit::QAInstance inst;
            char id[32];
            std::snprintf(id, sizeof(id), "q%03d-%s", serial++, cls.tag);
            inst.id = id;
            inst.query = "What is the capital of Country" + std::to_string(serial) + "? (tag-" +
                         cls.tag + ")";
            ragaudit::ContextDocument doc;
            doc.title = "Country" + std::to_string(serial);
            doc.body = cls.sufficient
                           ? "The capital of Country" + std::to_string(serial) +
                                 " is Metropolis" + std::to_string(serial) + ". suffmark"
                           : "Country" + std::to_string(serial) +
                                 " has a varied climate and a long coastal history.";
            inst.context.push_back(std::move(doc));
            inst.gold_answers = {cls.answer};
            inst.gold_sufficiency = cls.sufficient;
            instances.push_back(std::move(inst));
        }
    }
    return instances;
}

// Generator script. Rule order matters: self-rating rules (matched via the
// rating prompt's "Proposed answer:" line) must come before the plain QA
// rules, because QA rules keyed on the question tag would match rating
// prompts too.
inline nlohmann::json synthetic_generator_script() {
    nlohmann::json rules = nlohmann::json::array();
    auto rating_rule = [&rules](const char* tag, nlohmann::json seeds, const char* reply) {
        nlohmann::json rule;
        rule["prompt_contains"] = {std::string("Proposed answer:"),
                                   std::string("(tag-") + tag + ")"};
        if (!seeds.is_null()) rule["seed_in"] = std::move(seeds);
        rule["reply"] = reply;
        rules.push_back(std::move(rule));
    };
    for (const SyntheticClass& cls : synthetic_classes()) {
        if (cls.true_ratings > 0 && cls.true_ratings < 5) {
            nlohmann::json seeds = nlohmann::json::array();
            for (int s = 0; s < cls.true_ratings; ++s) seeds.push_back(s);
            rating_rule(cls.tag, std::move(seeds), "Judgment: True");
        }
        rating_rule(cls.tag, nullptr, cls.true_ratings == 5 ? "Judgment: True" : "Judgment: False");
    }
    for (const SyntheticClass& cls : synthetic_classes()) {
        nlohmann::json rule;
        rule["prompt_contains"] = std::string("(tag-") + cls.tag + ")";
        rule["reply"] = cls.reply;
        rules.push_back(std::move(rule));
    }
    return nlohmann::json{{"name", "mock-generator"},
                          {"default", "The answer is: I don't know."},
                          {"rules", std::move(rules)}};
}

inline nlohmann::json synthetic_autorater_script() {
    return nlohmann::json{
        {"name", "mock-autorater"},
        {"default", "Verdict: Insufficient"},
        {"rules", nlohmann::json::array({{{"prompt_contains", "suffmark"},
                                          {"reply", "Verdict: Sufficient"}}})},
    };
}

inline nlohmann::json synthetic_evaluator_script() {
    return nlohmann::json{
        {"name", "mock-evaluator"},
        {"default", "No reference matches the response. Rating: hallucinate"},
    };
}

struct SyntheticFixture {
    std::filesystem::path dataset;
    std::filesystem::path generator_script;
    std::filesystem::path autorater_script;
    std::filesystem::path evaluator_script;
};

inline SyntheticFixture write_synthetic_fixture(const std::filesystem::path& dir,
                                                int n_per_class = 40) {
    SyntheticFixture fx;
    std::filesystem::create_directories(dir);
    fx.dataset = dir / "dataset.jsonl";
    ragaudit::Dataset data;
    data.name = "dataset";
    data.instances = make_synthetic_instances(n_per_class);
    ragaudit::save_dataset(data, fx.dataset);

    fx.generator_script = dir / "generator.json";
    write_file(fx.generator_script, synthetic_generator_script().dump(2) + "\n");
    fx.autorater_script = dir / "autorater.json";
    write_file(fx.autorater_script, synthetic_autorater_script().dump(2) + "\n");
    fx.evaluator_script = dir / "evaluator.json";
    write_file(fx.evaluator_script, synthetic_evaluator_script().dump(2) + "\n");
    return fx;
}

// A ready-to-run config over the synthetic fixture.
inline ragaudit::RunConfig synthetic_config(const SyntheticFixture& fx,
                                            const std::filesystem::path& out_dir,
                                            const std::filesystem::path& cache_dir) {
    ragaudit::RunConfig config;
    config.dataset = fx.dataset.string();
    config.out_dir = out_dir.string();
    config.cache_dir = cache_dir.string();
    config.generator.kind = "scripted";
    config.generator.script = fx.generator_script.string();
    config.autorater.kind = "scripted";
    config.autorater.script = fx.autorater_script.string();
    config.evaluator.kind = "scripted";
    config.evaluator.script = fx.evaluator_script.string();
    return config;
}

}  // namespace testkit
