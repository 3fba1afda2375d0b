#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragaudit/backends.hpp"
#include "ragaudit/chunker.hpp"
#include "ragaudit/client.hpp"
#include "ragaudit/dataset.hpp"
#include "ragaudit/judge.hpp"
#include "ragaudit/normalize.hpp"

namespace ragaudit {

enum class RaterKind {
    FULL_0SHOT,
    FULL_1SHOT,
    CHUNKED,
    CONTAINS_GT,
    ENTAILMENT_THRESHOLD,
};

inline const char* to_string(RaterKind r) {
    switch (r) {
        case RaterKind::FULL_0SHOT: return "full_0shot";
        case RaterKind::FULL_1SHOT: return "full_1shot";
        case RaterKind::CHUNKED: return "chunked";
        case RaterKind::CONTAINS_GT: return "contains_gt";
        case RaterKind::ENTAILMENT_THRESHOLD: return "entailment_threshold";
    }
    throw Error("unreachable rater kind");
}

inline RaterKind rater_kind_from_string(const std::string& name) {
    for (RaterKind r : {RaterKind::FULL_0SHOT, RaterKind::FULL_1SHOT, RaterKind::CHUNKED,
                        RaterKind::CONTAINS_GT, RaterKind::ENTAILMENT_THRESHOLD}) {
        if (name == to_string(r)) return r;
    }
    throw ConfigError("unknown rater: '" + name + "'");
}

struct SufficiencyVerdict {
    std::string instance_id;
    bool sufficient = false;
    RaterKind rater = RaterKind::FULL_0SHOT;
    std::optional<std::vector<bool>> chunk_votes;  // CHUNKED only
    std::optional<double> score;                   // ENTAILMENT_THRESHOLD only

    friend bool operator==(const SufficiencyVerdict&, const SufficiencyVerdict&) = default;
};

struct RaterStats {
    std::uint64_t rated = 0;
    std::uint64_t parse_failures = 0;
    std::uint64_t chunk_votes_cast = 0;
};

enum class Shots { Zero, One };

inline constexpr double kDefaultEntailmentThreshold = 0.05;

namespace detail {

inline void require_context(const QAInstance& instance) {
    if (instance.context.empty()) {
        throw Error("instance '" + instance.id + "' has no context documents");
    }
}

// Unparseable judge output counts as insufficient: selective generation
// treats insufficiency as a cue to abstain, so the conservative side is
// "insufficient". The failure is counted so the policy stays auditable.
inline bool vote_from_completion(const RawCompletion& completion, RaterStats* stats) {
    std::optional<bool> vote = parse_sufficiency(completion.text);
    if (!vote) {
        if (stats) ++stats->parse_failures;
        return false;
    }
    return *vote;
}

}  // namespace detail

// One judge call over the whole flattened context.
inline SufficiencyVerdict rate_full(const QAInstance& instance, JudgeClient& client,
                                    JudgeBackend& backend, Shots shots,
                                    RaterStats* stats = nullptr) {
    detail::require_context(instance);
    JudgeRequest request;
    request.template_id = (shots == Shots::Zero) ? TemplateId::SUFFICIENCY_0SHOT
                                                 : TemplateId::SUFFICIENCY_1SHOT;
    request.slots = {{"question", instance.query}, {"context", flatten_context(instance.context)}};
    RawCompletion completion = client.complete(backend, request);

    SufficiencyVerdict verdict;
    verdict.instance_id = instance.id;
    verdict.rater = (shots == Shots::Zero) ? RaterKind::FULL_0SHOT : RaterKind::FULL_1SHOT;
    verdict.sufficient = detail::vote_from_completion(completion, stats);
    if (stats) ++stats->rated;
    return verdict;
}

// One judge call per chunk; the instance is sufficient when any chunk is.
// Voting short-circuits on the first sufficient chunk (OR makes that
// semantics-preserving), so chunk_votes may be shorter than the chunk list.
inline SufficiencyVerdict rate_chunked(const QAInstance& instance, JudgeClient& client,
                                       JudgeBackend& backend, std::size_t chunk_size,
                                       bool preserve_structure = true,
                                       RaterStats* stats = nullptr) {
    detail::require_context(instance);
    std::vector<ContextChunk> chunks =
        chunk_context(instance.context, chunk_size, preserve_structure, client.tokenizer());

    SufficiencyVerdict verdict;
    verdict.instance_id = instance.id;
    verdict.rater = RaterKind::CHUNKED;
    verdict.chunk_votes.emplace();
    for (const ContextChunk& chunk : chunks) {
        JudgeRequest request;
        request.template_id = TemplateId::SUFFICIENCY_CHUNK;
        request.slots = {{"question", instance.query}, {"context", chunk.text}};
        RawCompletion completion = client.complete(backend, request);
        bool vote = detail::vote_from_completion(completion, stats);
        verdict.chunk_votes->push_back(vote);
        if (stats) ++stats->chunk_votes_cast;
        if (vote) {
            verdict.sufficient = true;
            break;
        }
    }
    if (stats) ++stats->rated;
    return verdict;
}

// Answer-dependent baseline: does some normalized gold answer appear inside
// the normalized context? A gold answer that normalizes to the empty string
// (all stop words) never counts as contained.
inline SufficiencyVerdict contains_gt(const QAInstance& instance) {
    if (instance.gold_answers.empty()) {
        throw Error("instance '" + instance.id + "' has no gold answers");
    }
    const std::string context = normalize(flatten_context(instance.context));
    SufficiencyVerdict verdict;
    verdict.instance_id = instance.id;
    verdict.rater = RaterKind::CONTAINS_GT;
    for (const std::string& answer : instance.gold_answers) {
        const std::string needle = normalize(answer);
        if (!needle.empty() && context.find(needle) != std::string::npos) {
            verdict.sufficient = true;
            break;
        }
    }
    return verdict;
}

// Answer-dependent baseline: maximum entailment probability over
// (chunk, gold answer) pairs, thresholded.
inline SufficiencyVerdict entailment_rate(const QAInstance& instance, EntailmentScorer& scorer,
                                          const Tokenizer& tokenizer,
                                          double threshold = kDefaultEntailmentThreshold,
                                          std::size_t chunk_size = 1600,
                                          bool preserve_structure = true) {
    detail::require_context(instance);
    if (instance.gold_answers.empty()) {
        throw Error("instance '" + instance.id + "' has no gold answers");
    }
    std::vector<ContextChunk> chunks =
        chunk_context(instance.context, chunk_size, preserve_structure, tokenizer);

    double best = 0.0;
    for (const ContextChunk& chunk : chunks) {
        for (const std::string& answer : instance.gold_answers) {
            double p = scorer.score(chunk.text, instance.query, answer);
            if (!(p >= 0.0 && p <= 1.0)) {
                throw Error("entailment scorer '" + scorer.name() +
                            "' returned a probability outside [0,1]");
            }
            if (p > best) best = p;
        }
    }
    SufficiencyVerdict verdict;
    verdict.instance_id = instance.id;
    verdict.rater = RaterKind::ENTAILMENT_THRESHOLD;
    verdict.score = best;
    verdict.sufficient = (best >= threshold);
    return verdict;
}

struct RaterMetrics {
    double f1 = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;

    friend bool operator==(const RaterMetrics&, const RaterMetrics&) = default;
};

// Standard binary-classification metrics with "sufficient" as the positive
// class. Zero denominators yield 0 with a warning rather than NaN.
inline RaterMetrics score_rater(const std::vector<SufficiencyVerdict>& verdicts,
                                const std::map<std::string, bool>& gold) {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const SufficiencyVerdict& v : verdicts) {
        auto it = gold.find(v.instance_id);
        if (it == gold.end()) {
            throw MissingInputError("no gold sufficiency label for instance '" + v.instance_id +
                                    "'");
        }
        if (v.sufficient && it->second) ++tp;
        else if (v.sufficient && !it->second) ++fp;
        else if (!v.sufficient && it->second) ++fn;
        else ++tn;
    }

    RaterMetrics m;
    auto ratio = [](std::size_t num, std::size_t den, const char* what) -> double {
        if (den == 0) {
            warn(std::string("score_rater: ") + what + " has zero denominator; reporting 0");
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(tp, tp + fp, "precision");
    m.recall = ratio(tp, tp + fn, "recall");
    if (m.precision + m.recall == 0.0) {
        warn("score_rater: f1 has zero denominator; reporting 0");
        m.f1 = 0.0;
    } else {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    m.accuracy = ratio(tp + tn, tp + fp + fn + tn, "accuracy");
    return m;
}

}  // namespace ragaudit
