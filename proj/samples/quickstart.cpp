// Quick tour of the library: chunk a document, rate sufficiency with a
// scripted judge, train the risk gate on synthetic signals, and sweep the
// abstention threshold into a coverage curve.

#include <iostream>

#include "ragaudit/ragaudit.hpp"

using namespace ragaudit;

int main() {
    // -- chunking ---------------------------------------------------------
    const std::string doc =
        "The first expedition reached the valley in 1911. Supplies ran low by "
        "October. A relief column arrived the next spring and mapped the "
        "eastern ridge in detail.";
    ApproxTokenizer tokenizer;
    std::vector<ContextChunk> chunks = chunk_text(doc, 12, true, tokenizer);
    std::cout << "chunks of a " << tokenizer.count(doc) << "-token document at size 12: "
              << chunks.size() << "\n";
    for (const ContextChunk& chunk : chunks) {
        std::cout << "  [" << chunk.index << "] " << chunk.token_count << " tokens\n";
    }

    // -- sufficiency rating -----------------------------------------------
    ContextDocument log;
    log.title = "Expedition log";
    log.body = doc;

    QAInstance answerable;
    answerable.id = "q1";
    answerable.query = "When did the first expedition reach the valley?";
    answerable.context = {log};
    answerable.gold_answers = {"1911"};

    QAInstance unanswerable = answerable;
    unanswerable.id = "q2";
    unanswerable.query = "Who led the relief column?";
    unanswerable.gold_answers = {"Captain Ellery"};

    // A scripted judge keyed on the question text: the log answers q1 only.
    nlohmann::json script = {
        {"name", "demo-judge"},
        {"default", "Insufficient"},
        {"rules", nlohmann::json::array({{{"prompt_contains", "When did the first expedition"},
                                          {"reply", "Verdict: Sufficient"}}})},
    };
    ScriptedBackend judge(script);
    JudgeClient client;
    for (const QAInstance* instance : {&answerable, &unanswerable}) {
        SufficiencyVerdict verdict = rate_full(*instance, client, judge, Shots::Zero);
        std::cout << instance->id << " sufficient=" << (verdict.sufficient ? "yes" : "no")
                  << "\n";
    }
    std::cout << "contains_gt(q1)=" << (contains_gt(answerable).sufficient ? "yes" : "no")
              << "\n";

    // -- risk gate + coverage curve ----------------------------------------
    // Synthetic signals: confident answers are usually right, hedged ones not.
    std::vector<SignalRecord> signals;
    std::map<std::string, Rating> ratings;
    std::vector<TrainingExample> examples;
    for (int i = 0; i < 40; ++i) {
        SignalRecord r;
        r.instance_id = "s" + std::to_string(i);
        r.confidence = (i % 4 == 0) ? 0.2 + 0.01 * i : 0.7 + 0.005 * i;
        r.confidence_kind = ConfidenceKind::P_TRUE;
        r.sufficient = (i % 3 != 0);
        bool hallucinated = r.confidence < 0.5 || (!r.sufficient && i % 5 == 0);
        signals.push_back(r);
        ratings[r.instance_id] = hallucinated ? Rating::Hallucinate : Rating::Correct;
        examples.push_back({features_of(r), hallucinated});
    }
    LogisticModel model = random_search(examples, 25, /*seed=*/7);
    std::cout << "risk gate: w_conf=" << model.weights[0] << " w_suff=" << model.weights[1]
              << " bias=" << model.bias << "\n";

    CoverageCurve curve = coverage_curve(signals, ratings, model);
    std::cout << "coverage curve (" << curve.points.size() << " thresholds):\n";
    for (const CoveragePoint& p : curve.points) {
        if (p.accuracy_undefined) continue;
        std::cout << "  threshold=" << p.threshold << " coverage=" << p.coverage
                  << " selective_accuracy=" << p.selective_accuracy << "\n";
    }
    return 0;
}
