// Acceptance gate: ten self-contained checks, one per release criterion,
// covering golden lexical cases, metric arithmetic, stratification, chunk-OR
// semantics, the predictor, coverage curves, signal degeneracy, end-to-end
// determinism through the real CLI, confidence arithmetic, and context
// truncation/chunking properties. A listener prints one PASS/FAIL line per
// criterion so the run is skimmable from a terminal.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragaudit/ragaudit.hpp"
#include "fixtures.hpp"

using namespace ragaudit;
using Catch::Matchers::WithinAbs;

namespace {

class CriterionLines : public Catch::EventListenerBase {
  public:
    using Catch::EventListenerBase::EventListenerBase;

    void testCaseEnded(const Catch::TestCaseStats& stats) override {
        bool ok = stats.totals.assertions.allOk() && stats.totals.testCases.failed == 0;
        std::cout << "[acceptance] " << (ok ? "PASS" : "FAIL") << " "
                  << stats.testInfo->name << std::endl;
    }
};

class Stopwatch {
  public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

// --- shared fixture builders --------------------------------------------------

ResponseRecord rated(const std::string& id, Rating rating) {
    ResponseRecord r;
    r.instance_id = id;
    r.response_text = "text";
    r.rating = rating;
    return r;
}

SufficiencyVerdict verdict_of(const std::string& id, bool sufficient) {
    SufficiencyVerdict v;
    v.instance_id = id;
    v.sufficient = sufficient;
    return v;
}

void fill_stratum(bool sufficient, std::size_t n_correct, std::size_t n_abstain,
                  std::size_t n_hallucinate, std::vector<ResponseRecord>* records,
                  std::vector<SufficiencyVerdict>* verdicts) {
    auto push = [&](Rating rating, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            std::string id = "q" + std::to_string(records->size());
            records->push_back(rated(id, rating));
            verdicts->push_back(verdict_of(id, sufficient));
        }
    };
    push(Rating::Correct, n_correct);
    push(Rating::Abstain, n_abstain);
    push(Rating::Hallucinate, n_hallucinate);
}

// Independent brute-force rater metrics for randomized cross-checking.
RaterMetrics brute_metrics(const std::vector<std::pair<bool, bool>>& pred_gold) {
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (auto [pred, gold] : pred_gold) {
        if (pred && gold) ++tp;
        else if (pred && !gold) ++fp;
        else if (!pred && gold) ++fn;
        else ++tn;
    }
    RaterMetrics m;
    m.precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.accuracy = pred_gold.empty() ? 0.0 : (tp + tn) / static_cast<double>(pred_gold.size());
    return m;
}

// A context whose chunking at size 3 (whitespace tokens) yields exactly one
// chunk per sentence, so a vote vector maps 1:1 onto chunks.
QAInstance instance_with_chunks(std::size_t n) {
    std::string body;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) body += " ";
        body += "alpha beta gamma" + std::to_string(i) + ".";
    }
    return testkit::make_instance("q1", "who?", body, {"gold"});
}

bool chunked_verdict(const std::vector<bool>& votes) {
    QAInstance instance = instance_with_chunks(votes.size());
    std::size_t next = 0;
    CallbackBackend backend("mock-rater", 100000,
                            [&votes, &next](const std::string&, const Sampling&) {
                                REQUIRE(next < votes.size());
                                bool vote = votes[next++];
                                return std::string(vote ? "Verdict: Sufficient"
                                                        : "Verdict: Insufficient");
                            });
    JudgeClient::Options opt;
    opt.tokenizer = make_tokenizer("whitespace");
    JudgeClient client(std::move(opt));
    return rate_chunked(instance, client, backend, 3).sufficient;
}

TrainingExample example(double confidence, double sufficient, bool label) {
    TrainingExample ex;
    ex.features = FeatureVector{confidence, sufficient};
    ex.label = label;
    return ex;
}

std::vector<TrainingExample> random_examples(std::mt19937_64& rng, std::size_t n) {
    std::vector<TrainingExample> data;
    for (std::size_t i = 0; i < n; ++i) {
        data.push_back(example(detail::unit_uniform(rng), (rng() % 2) ? 1.0 : 0.0,
                               (rng() % 2) != 0));
    }
    return data;
}

SignalRecord signal(const std::string& id, double confidence, bool sufficient,
                    bool abstained = false) {
    SignalRecord r;
    r.instance_id = id;
    r.confidence = confidence;
    r.sufficient = sufficient;
    r.abstained = abstained;
    return r;
}

double safety_of(const LogisticModel& model, const SignalRecord& record) {
    return 1.0 - score(model, features_of(record));
}

// Exhaustive recomputation of one curve point at safety threshold t.
CoveragePoint brute_point(const std::vector<SignalRecord>& signals,
                          const std::map<std::string, Rating>& ratings,
                          const LogisticModel& model, double t) {
    CoveragePoint p;
    p.threshold = t;
    for (const SignalRecord& record : signals) {
        if (record.abstained || safety_of(model, record) < t) continue;
        ++p.n_answered;
        if (ratings.at(record.instance_id) == Rating::Correct) ++p.n_correct;
    }
    p.coverage = signals.empty()
                     ? 0.0
                     : static_cast<double>(p.n_answered) / static_cast<double>(signals.size());
    if (p.n_answered == 0) {
        p.accuracy_undefined = true;
    } else {
        p.selective_accuracy =
            static_cast<double>(p.n_correct) / static_cast<double>(p.n_answered);
    }
    return p;
}

// --- CLI driving (criterion 8) ------------------------------------------------

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

void run_cli(const std::string& stage, const std::filesystem::path& config,
             const std::filesystem::path& out, const std::filesystem::path& stderr_file) {
    std::string cmd = std::string(quoted(RAGAUDIT_CLI_PATH)) + " " + stage + " --config " +
                      quoted(config) + " --out " + quoted(out) + " 2> " + quoted(stderr_file);
    int rc = std::system(cmd.c_str());
    INFO("command: " << cmd << "\nstderr: " << testkit::read_file(stderr_file));
    REQUIRE(rc == 0);
}

std::vector<std::string> relative_files(const std::filesystem::path& root) {
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            files.push_back(std::filesystem::relative(entry.path(), root).string());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

TEST_CASE("criterion 1: golden lexical cases reproduce exactly") {
    Stopwatch watch;
    // Date written in a different order is not a lexical match.
    CHECK_FALSE(lexical_match("August 13, 1896.", {"13 August 1896"}));
    // A nickname does not match the recorded full name.
    CHECK_FALSE(lexical_match("Jerry Buss.", {"Gerald Hatten Buss"}));
    // Partial containment inside a longer clause still matches.
    CHECK(lexical_match("...the forging of the Rings of Power, the rise of Sauron...",
                        {"The Rings of Power"}));
    CHECK(watch.seconds() < 1.0);
}

TEST_CASE("criterion 2: rater metric arithmetic is exact") {
    Stopwatch watch;

    // Hand-built confusion matrix: TP=2, FP=1, FN=1, TN=1.
    std::vector<SufficiencyVerdict> verdicts;
    std::map<std::string, bool> gold;
    auto add = [&](bool pred, bool truth) {
        std::string id = "q" + std::to_string(verdicts.size());
        verdicts.push_back(verdict_of(id, pred));
        gold[id] = truth;
    };
    add(true, true);
    add(true, true);
    add(true, false);
    add(false, true);
    add(false, false);

    RaterMetrics m = score_rater(verdicts, gold);
    CHECK(m.precision == 2.0 / 3.0);
    CHECK(m.recall == 2.0 / 3.0);
    CHECK_THAT(m.f1, WithinAbs(2.0 / 3.0, 1e-12));
    CHECK(m.accuracy == 0.6);

    // 100 randomized confusion matrices against the brute-force formulas.
    std::mt19937_64 rng(52);
    for (int round = 0; round < 100; ++round) {
        std::vector<SufficiencyVerdict> vs;
        std::map<std::string, bool> gs;
        std::vector<std::pair<bool, bool>> pairs;
        std::size_t n = 1 + rng() % 40;
        for (std::size_t i = 0; i < n; ++i) {
            bool pred = (rng() % 2) != 0;
            bool truth = (rng() % 2) != 0;
            std::string id = "r" + std::to_string(i);
            vs.push_back(verdict_of(id, pred));
            gs[id] = truth;
            pairs.emplace_back(pred, truth);
        }
        ScopedWarnCapture quiet;  // zero-denominator matrices warn by design
        RaterMetrics got = score_rater(vs, gs);
        RaterMetrics want = brute_metrics(pairs);
        CHECK_THAT(got.precision, WithinAbs(want.precision, 1e-12));
        CHECK_THAT(got.recall, WithinAbs(want.recall, 1e-12));
        CHECK_THAT(got.f1, WithinAbs(want.f1, 1e-12));
        CHECK_THAT(got.accuracy, WithinAbs(want.accuracy, 1e-12));
    }
    CHECK(watch.seconds() < 1.0);
}

TEST_CASE("criterion 3: stratified percentages match the reference table") {
    Stopwatch watch;
    std::vector<ResponseRecord> records;
    std::vector<SufficiencyVerdict> verdicts;
    fill_stratum(true, 53, 1, 9, &records, &verdicts);    // 63 with enough context
    fill_stratum(false, 5, 26, 21, &records, &verdicts);  // 52 without
    REQUIRE(records.size() == 115);

    std::vector<StratifiedBreakdown> out = stratify(records, verdicts);
    REQUIRE(out.size() == 3);
    CHECK(out[0].stratum == Stratum::SUFFICIENT);
    CHECK(out[0].n == 63);
    CHECK(out[0].pct_correct == 84.1);
    CHECK(out[0].pct_abstain == 1.6);
    CHECK(out[0].pct_hallucinate == 14.3);
    CHECK(out[1].stratum == Stratum::INSUFFICIENT);
    CHECK(out[1].n == 52);
    CHECK(out[1].pct_correct == 9.6);
    CHECK(out[1].pct_abstain == 50.0);
    CHECK(out[1].pct_hallucinate == 40.4);
    CHECK(watch.seconds() < 1.0);
}

TEST_CASE("criterion 4: chunked rating is a monotone OR over chunk votes") {
    Stopwatch watch;
    std::mt19937_64 rng(4242);
    for (int round = 0; round < 1000; ++round) {
        std::size_t n = 1 + rng() % 8;
        std::vector<bool> votes;
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            votes.push_back((rng() % 2) != 0);
            any = any || votes.back();
        }
        bool before = chunked_verdict(votes);
        REQUIRE(before == any);

        // Appending chunks must never flip sufficient -> insufficient.
        std::size_t extra = 1 + rng() % 3;
        for (std::size_t i = 0; i < extra; ++i) votes.push_back((rng() % 2) != 0);
        bool after = chunked_verdict(votes);
        REQUIRE_FALSE((before && !after));
    }
    CHECK(watch.seconds() < 5.0);
}

TEST_CASE("criterion 5: predictor gradients, separability, and search reproducibility") {
    Stopwatch watch;
    std::mt19937_64 rng(20240217);

    // Analytic gradient vs central finite differences at 20 random points.
    std::vector<TrainingExample> data = random_examples(rng, 30);
    const double lambda = 0.1;
    const double h = 1e-6;
    for (int point = 0; point < 20; ++point) {
        std::array<double, 2> w{(detail::unit_uniform(rng) - 0.5) * 6.0,
                                (detail::unit_uniform(rng) - 0.5) * 6.0};
        double b = (detail::unit_uniform(rng) - 0.5) * 6.0;
        Gradient g = nll_gradient(w, b, data, lambda);
        auto close = [&](double analytic, double numeric) {
            double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
            REQUIRE(rel < 1e-5);
        };
        close(g.d_weights[0], (nll_loss({w[0] + h, w[1]}, b, data, lambda) -
                               nll_loss({w[0] - h, w[1]}, b, data, lambda)) /
                                  (2 * h));
        close(g.d_weights[1], (nll_loss({w[0], w[1] + h}, b, data, lambda) -
                               nll_loss({w[0], w[1] - h}, b, data, lambda)) /
                                  (2 * h));
        close(g.d_bias,
              (nll_loss(w, b + h, data, lambda) - nll_loss(w, b - h, data, lambda)) / (2 * h));
    }

    // Linearly separable toy data trains to accuracy 1.0.
    std::vector<TrainingExample> separable;
    for (int i = 0; i < 20; ++i) {
        separable.push_back(example(0.85 + 0.005 * i, (i % 2) ? 1.0 : 0.0, false));
        separable.push_back(example(0.05 + 0.005 * i, (i % 2) ? 1.0 : 0.0, true));
    }
    Hyperparams hp;
    hp.l2_lambda = 0.0;
    hp.learning_rate = 0.5;
    hp.epochs = 2000;
    LogisticModel fitted = train(separable, hp, 1);
    for (const TrainingExample& ex : separable) {
        bool predicted = score(fitted, ex.features) >= 0.5;
        REQUIRE(predicted == ex.label);
    }

    // random_search is bit-reproducible for a fixed seed.
    std::vector<TrainingExample> pool = random_examples(rng, 40);
    RandomSearchReport report_a;
    RandomSearchReport report_b;
    LogisticModel a = random_search(pool, 25, 11, true, &report_a);
    LogisticModel b = random_search(pool, 25, 11, true, &report_b);
    REQUIRE(a == b);
    CHECK(report_a.best_index == report_b.best_index);
    CHECK(report_a.best_hyperparams == report_b.best_hyperparams);
    CHECK(report_a.best_val_loss == report_b.best_val_loss);
    CHECK(report_a.val_accuracy == report_b.val_accuracy);
    CHECK(report_a.n_train == report_b.n_train);
    CHECK(report_a.n_val == report_b.n_val);
    CHECK(watch.seconds() < 30.0);
}

TEST_CASE("criterion 6: coverage curves are exact against brute force") {
    Stopwatch watch;

    // Oracle fixture: the predictor scores exactly 1 on hallucinations and
    // exactly 0 elsewhere, so every partial-coverage prefix is clean.
    LogisticModel oracle;
    oracle.weights = {8000.0, 0.0};
    oracle.bias = -4000.0;
    std::vector<SignalRecord> records;
    std::map<std::string, Rating> ratings;
    const std::size_t n_total = 24;
    std::size_t n_correct = 0;
    for (std::size_t i = 0; i < n_total; ++i) {
        bool hallucinated = (i % 3 == 0);  // 8 of 24
        std::string id = "q" + std::to_string(i);
        records.push_back(signal(id, hallucinated ? 1.0 : 0.0, i % 2 == 0));
        ratings[id] = hallucinated ? Rating::Hallucinate : Rating::Correct;
        if (!hallucinated) ++n_correct;
    }
    double fraction_correct = static_cast<double>(n_correct) / n_total;
    CoverageCurve curve = coverage_curve(records, ratings, oracle);
    for (const CoveragePoint& p : curve.points) {
        if (!p.accuracy_undefined && p.coverage <= fraction_correct + 1e-12) {
            REQUIRE_THAT(p.selective_accuracy, WithinAbs(1.0, 1e-9));
        }
    }
    REQUIRE_THAT(curve.points.back().coverage, WithinAbs(1.0, 1e-9));
    REQUIRE_THAT(curve.points.back().selective_accuracy, WithinAbs(fraction_correct, 1e-9));

    // Random fixtures with N <= 12: the curve equals exhaustive recomputation,
    // coverage is non-increasing in threshold, and the widest point's accuracy
    // equals the raw accuracy over everything answerable.
    std::mt19937_64 rng(606);
    for (int round = 0; round < 40; ++round) {
        std::size_t n = 1 + rng() % 12;
        std::vector<SignalRecord> sig;
        std::map<std::string, Rating> rat;
        for (std::size_t i = 0; i < n; ++i) {
            std::string id = "r" + std::to_string(i);
            bool abstained = rng() % 5 == 0;
            sig.push_back(signal(id, detail::unit_uniform(rng), rng() % 2 != 0, abstained));
            rat[id] = abstained ? Rating::Abstain
                                : (rng() % 2 ? Rating::Correct : Rating::Hallucinate);
        }
        LogisticModel model;
        model.weights = {(detail::unit_uniform(rng) - 0.5) * 8.0,
                         (detail::unit_uniform(rng) - 0.5) * 8.0};
        model.bias = (detail::unit_uniform(rng) - 0.5) * 4.0;

        CoverageCurve got = coverage_curve(sig, rat, model);
        REQUIRE_FALSE(got.points.empty());
        double last_threshold = 2.0;
        double last_coverage = -1.0;
        for (const CoveragePoint& p : got.points) {
            CoveragePoint want = brute_point(sig, rat, model, p.threshold);
            REQUIRE(p.n_answered == want.n_answered);
            REQUIRE(p.n_correct == want.n_correct);
            REQUIRE_THAT(p.coverage, WithinAbs(want.coverage, 1e-9));
            REQUIRE_THAT(p.selective_accuracy, WithinAbs(want.selective_accuracy, 1e-9));
            REQUIRE(p.accuracy_undefined == want.accuracy_undefined);
            REQUIRE(p.threshold < last_threshold);  // thresholds strictly descend
            REQUIRE(p.coverage >= last_coverage);   // so coverage never shrinks
            last_threshold = p.threshold;
            last_coverage = p.coverage;
        }
        CoveragePoint raw = brute_point(sig, rat, model, 0.0);
        const CoveragePoint& widest = got.points.back();
        REQUIRE(widest.n_answered == raw.n_answered);
        REQUIRE_THAT(widest.selective_accuracy, WithinAbs(raw.selective_accuracy, 1e-9));
    }
    CHECK(watch.seconds() < 10.0);
}

TEST_CASE("criterion 7: zero sufficiency weight collapses onto the confidence-only curve") {
    Stopwatch watch;

    // Training data where sufficiency genuinely predicts the label, so the
    // pinned weight is a real constraint rather than a no-op.
    std::mt19937_64 rng(77);
    std::vector<TrainingExample> data;
    for (int i = 0; i < 60; ++i) {
        bool label = (rng() % 2) != 0;
        double confidence = detail::unit_uniform(rng);
        data.push_back(example(confidence, label ? 0.0 : 1.0, label));
    }
    LogisticModel confidence_only = random_search(data, 12, 5, false);
    REQUIRE(confidence_only.weights[1] == 0.0);

    // A combined-shape model with the sufficiency weight forced to zero must
    // trace the identical curve whatever the records' sufficiency bits say.
    LogisticModel combined = confidence_only;
    combined.use_sufficiency = true;  // shape says combined; weight stays 0

    std::vector<SignalRecord> records;
    std::map<std::string, Rating> ratings;
    for (int i = 0; i < 40; ++i) {
        std::string id = "q" + std::to_string(i);
        bool abstained = i % 7 == 0;
        records.push_back(signal(id, detail::unit_uniform(rng), rng() % 2 != 0, abstained));
        ratings[id] = abstained ? Rating::Abstain
                                : (rng() % 2 ? Rating::Correct : Rating::Hallucinate);
    }
    std::vector<SignalRecord> no_sufficiency = records;
    for (SignalRecord& r : no_sufficiency) r.sufficient = false;

    CoverageCurve a = coverage_curve(records, ratings, combined);
    CoverageCurve b = coverage_curve(no_sufficiency, ratings, confidence_only);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        REQUIRE(a.points[i].threshold == b.points[i].threshold);
        REQUIRE(a.points[i].coverage == b.points[i].coverage);
        REQUIRE(a.points[i].selective_accuracy == b.points[i].selective_accuracy);
        REQUIRE(a.points[i].n_answered == b.points[i].n_answered);
        REQUIRE(a.points[i].n_correct == b.points[i].n_correct);
        REQUIRE(a.points[i].accuracy_undefined == b.points[i].accuracy_undefined);
    }
    CHECK(watch.seconds() < 5.0);
}

TEST_CASE("criterion 8: six-stage pipeline is deterministic and fully cached") {
    Stopwatch watch;
    REQUIRE(std::filesystem::exists(RAGAUDIT_CLI_PATH));

    testkit::TempDir dir;
    testkit::SyntheticFixture fx = testkit::write_synthetic_fixture(dir / "fx", 40);

    nlohmann::json config = {
        {"dataset", fx.dataset.string()},
        {"cache_dir", (dir / "cache").string()},
        {"seed", 3},
        {"backends",
         {{"generator", {{"kind", "scripted"}, {"script", fx.generator_script.string()}}},
          {"autorater", {{"kind", "scripted"}, {"script", fx.autorater_script.string()}}},
          {"evaluator", {{"kind", "scripted"}, {"script", fx.evaluator_script.string()}}}}},
    };
    std::filesystem::path config_path = dir / "run.json";
    testkit::write_file(config_path, config.dump(2));

    const std::vector<std::string> stages = {"label", "answer", "signals",
                                             "train", "curve", "report"};
    std::filesystem::path cold = dir / "cold";
    std::filesystem::path warm = dir / "warm";

    Stopwatch cold_watch;
    for (const std::string& stage : stages) {
        run_cli(stage, config_path, cold, dir / ("cold_" + stage + ".stderr"));
    }
    REQUIRE(cold_watch.seconds() < 60.0);

    // Sanity: the 200-instance corpus took the expected shape.
    nlohmann::json label_stats;
    {
        std::ifstream in(cold / "label_stats.json");
        in >> label_stats;
    }
    REQUIRE(label_stats["n"] == 200);
    REQUIRE(label_stats["sufficient"] == 80);

    for (const std::string& stage : stages) {
        run_cli(stage, config_path, warm, dir / ("warm_" + stage + ".stderr"));
    }

    // The warm run is answered entirely from the cache.
    for (const std::string stage : {"label", "answer", "signals"}) {
        std::string log = testkit::read_file(dir / ("warm_" + stage + ".stderr"));
        INFO("warm " << stage << " stderr:\n" << log);
        REQUIRE(log.find("backend_calls=0 ") != std::string::npos);
    }

    // Byte-identical artifact trees, report bundle included.
    std::vector<std::string> cold_files = relative_files(cold);
    std::vector<std::string> warm_files = relative_files(warm);
    REQUIRE_FALSE(cold_files.empty());
    REQUIRE(cold_files == warm_files);
    for (const std::string& leaf : cold_files) {
        INFO("artifact: " << leaf);
        REQUIRE(testkit::read_file(cold / leaf) == testkit::read_file(warm / leaf));
    }
    CHECK(watch.seconds() < 60.0);
}

TEST_CASE("criterion 9: self-rated confidence is exact vote arithmetic") {
    std::vector<bool> pattern = {true, true, true, false, false};
    CallbackBackend backend("mock", 1 << 20,
                            [&pattern](const std::string& prompt, const Sampling& sampling) {
                                if (prompt.find("Proposed answer:") != std::string::npos) {
                                    std::uint64_t seed = sampling.seed.value_or(0);
                                    REQUIRE(seed < pattern.size());
                                    return std::string(pattern[seed] ? "Judgment: True"
                                                                     : "Judgment: False");
                                }
                                return std::string("The answer is: Paris.");
                            });
    JudgeClient client;
    QAInstance instance = testkit::make_instance("q1", "capital?", "Paris context.", {"Paris"});

    PTrueOptions options;
    options.n_samples = 3;
    options.n_ratings = 5;
    SignalRecord record = p_true(instance, client, backend, backend, options);
    CHECK(record.confidence == 0.6);  // [T,T,T,F,F]

    // 500 randomized vote patterns: confidence is always true_votes/n_ratings.
    std::mt19937_64 rng(909);
    for (int round = 0; round < 500; ++round) {
        pattern.clear();
        int n_ratings = 1 + static_cast<int>(rng() % 8);
        int expected_true = 0;
        for (int i = 0; i < n_ratings; ++i) {
            pattern.push_back((rng() % 2) != 0);
            if (pattern.back()) ++expected_true;
        }
        options.n_samples = 1 + static_cast<int>(rng() % 3);
        options.n_ratings = n_ratings;
        SignalRecord r = p_true(instance, client, backend, backend, options);
        REQUIRE(r.confidence == static_cast<double>(expected_true) / n_ratings);
    }
}

TEST_CASE("criterion 10: truncation and chunking hold their structural properties") {
    Stopwatch watch;
    auto tokenizer = make_tokenizer("whitespace");
    std::mt19937_64 rng(1010);

    auto random_instance = [&](int round) {
        std::size_t n_docs = 1 + rng() % 4;
        QAInstance inst;
        inst.id = "q" + std::to_string(round);
        inst.query = "what?";
        inst.gold_answers = {"gold"};
        for (std::size_t d = 0; d < n_docs; ++d) {
            ContextDocument doc;
            std::size_t n_words = 50 + rng() % 9000;
            std::string body;
            for (std::size_t w = 0; w < n_words; ++w) {
                if (w) body += ' ';
                body += "w" + std::to_string(rng() % 1000);
                if (rng() % 12 == 0) body += '.';
            }
            doc.body = std::move(body);
            inst.context.push_back(std::move(doc));
        }
        return inst;
    };

    auto total_tokens = [&](const QAInstance& inst) {
        std::size_t total = 0;
        for (const ContextDocument& doc : inst.context) total += tokenizer->count(doc.body);
        return total;
    };

    for (int round = 0; round < 500; ++round) {
        QAInstance inst = random_instance(round);

        QAInstance t2 = truncate_context(inst, 2000, *tokenizer);
        QAInstance t6 = truncate_context(inst, 6000, *tokenizer);
        QAInstance t10 = truncate_context(inst, 10000, *tokenizer);

        // Budgets are respected and re-truncation changes nothing.
        REQUIRE(total_tokens(t2) <= 2000);
        REQUIRE(total_tokens(t6) <= 6000);
        REQUIRE(total_tokens(t10) <= 10000);
        REQUIRE(truncate_context(t2, 2000, *tokenizer) == t2);
        REQUIRE(truncate_context(t6, 6000, *tokenizer) == t6);

        // Smaller budgets are prefixes of larger ones and of the original.
        std::string f2 = flatten_context(t2.context);
        std::string f6 = flatten_context(t6.context);
        std::string f10 = flatten_context(t10.context);
        std::string full = flatten_context(inst.context);
        REQUIRE(f6.compare(0, f2.size(), f2) == 0);
        REQUIRE(f10.compare(0, f6.size(), f6) == 0);
        REQUIRE(full.compare(0, f10.size(), f10) == 0);
    }

    // Chunking partitions the text, respects the size bound, and re-chunking
    // any produced chunk is a fixed point.
    for (int round = 0; round < 50; ++round) {
        QAInstance inst = random_instance(round);
        std::string text = flatten_context(inst.context);
        std::size_t chunk_size = 16 + rng() % 64;
        std::vector<ContextChunk> chunks = chunk_text(text, chunk_size, true, *tokenizer);
        std::string joined;
        for (const ContextChunk& c : chunks) {
            REQUIRE(c.token_count <= chunk_size);
            joined += c.text;
        }
        REQUIRE(joined == text);
        for (std::size_t i = 0; i < std::min<std::size_t>(3, chunks.size()); ++i) {
            std::vector<ContextChunk> again =
                chunk_text(chunks[i].text, chunk_size, true, *tokenizer);
            REQUIRE(again.size() == 1);
            REQUIRE(again[0].text == chunks[i].text);
        }
    }
    CHECK(watch.seconds() < 10.0);
}

CATCH_REGISTER_LISTENER(CriterionLines)
