#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragaudit/client.hpp"
#include "ragaudit/dataset.hpp"
#include "ragaudit/judge.hpp"
#include "ragaudit/sufficiency.hpp"

namespace ragaudit {

enum class ConfidenceKind { P_TRUE, P_CORRECT };

inline const char* to_string(ConfidenceKind k) {
    switch (k) {
        case ConfidenceKind::P_TRUE: return "p_true";
        case ConfidenceKind::P_CORRECT: return "p_correct";
    }
    throw Error("unreachable confidence kind");
}

inline ConfidenceKind confidence_kind_from_string(const std::string& name) {
    if (name == "p_true") return ConfidenceKind::P_TRUE;
    if (name == "p_correct") return ConfidenceKind::P_CORRECT;
    throw ConfigError("unknown confidence kind: '" + name + "'");
}

struct SignalRecord {
    std::string instance_id;
    double confidence = 0.0;
    ConfidenceKind confidence_kind = ConfidenceKind::P_TRUE;
    bool sufficient = false;
    std::string chosen_answer;
    bool abstained = false;

    friend bool operator==(const SignalRecord&, const SignalRecord&) = default;
};

struct SignalStats {
    std::uint64_t instances = 0;
    std::uint64_t samples_drawn = 0;
    std::uint64_t ratings_drawn = 0;
    std::uint64_t parse_failures = 0;
    std::uint64_t probabilities_clamped = 0;
};

struct PTrueOptions {
    int n_samples = 20;
    int n_ratings = 5;
    double temperature = 1.0;  // sampling temperature for answers and ratings
    bool chain_of_thought = true;
    std::vector<std::string> extra_abstentions;
};

// Confidence = fraction of "True" self-ratings of the modal sampled answer.
// Seeds are the sample/rating indices, so every call is individually cached
// and reruns are free. Gold answers never enter either prompt.
inline SignalRecord p_true(const QAInstance& instance, JudgeClient& client,
                           JudgeBackend& generator, JudgeBackend& rater,
                           const PTrueOptions& options = {}, SignalStats* stats = nullptr) {
    if (options.n_samples < 1 || options.n_ratings < 1) {
        throw ConfigError("p_true needs n_samples >= 1 and n_ratings >= 1");
    }
    if (!(options.temperature > 0.0)) {
        throw ConfigError("p_true needs a positive sampling temperature");
    }
    const std::string references = flatten_context(instance.context);

    std::map<std::string, int> answer_counts;
    for (int i = 0; i < options.n_samples; ++i) {
        JudgeRequest request;
        request.template_id = options.chain_of_thought ? TemplateId::QA_COT
                                                       : TemplateId::QA_ANSWER_ONLY;
        request.slots = {{"question", instance.query}, {"references", references}};
        request.sampling.temperature = options.temperature;
        request.sampling.seed = static_cast<std::uint64_t>(i);
        RawCompletion completion = client.complete(generator, request);
        ExtractedAnswer extracted = extract_answer(completion.text, options.extra_abstentions);
        ++answer_counts[extracted.answer];
        if (stats) ++stats->samples_drawn;
    }

    // Modal answer; ties go to the lexicographically smallest, which is the
    // first key holding the maximum in this ordered map.
    std::string modal;
    int best = 0;
    for (const auto& [answer, count] : answer_counts) {
        if (count > best) {
            best = count;
            modal = answer;
        }
    }

    int true_votes = 0;
    int failures = 0;
    for (int r = 0; r < options.n_ratings; ++r) {
        JudgeRequest request;
        request.template_id = TemplateId::P_TRUE_RATE;
        request.slots = {{"question", instance.query},
                         {"references", references},
                         {"proposed_answer", modal}};
        request.sampling.temperature = options.temperature;
        request.sampling.seed = static_cast<std::uint64_t>(r);
        RawCompletion completion = client.complete(rater, request);
        std::optional<bool> vote = parse_true_false(completion.text);
        if (!vote) {
            ++failures;
            if (stats) ++stats->parse_failures;
        } else if (*vote) {
            ++true_votes;
        }
        if (stats) ++stats->ratings_drawn;
    }
    if (failures == options.n_ratings) {
        throw ParseError("all " + std::to_string(options.n_ratings) +
                         " self-ratings unparseable for instance '" + instance.id + "'");
    }

    SignalRecord record;
    record.instance_id = instance.id;
    record.confidence = static_cast<double>(true_votes) / options.n_ratings;
    record.confidence_kind = ConfidenceKind::P_TRUE;
    record.chosen_answer = modal;
    record.abstained = is_abstention(modal, options.extra_abstentions);
    if (stats) ++stats->instances;
    return record;
}

struct PCorrectPair {
    std::string answer;
    double probability = 0.0;
};

namespace detail {

inline std::optional<double> leading_double(std::string_view text) {
    std::string head(trim_view(text).substr(0, 64));
    const char* p = head.c_str();
    char* end = nullptr;
    double v = std::strtod(p, &end);
    if (end == p || v != v) return std::nullopt;  // no digits, or NaN
    return v;
}

}  // namespace detail

// Pattern-match the mandated "Answer1: ... Probability1: ... Answer2: ...
// Probability2: ..." line. Returns the pairs found (possibly just the first);
// empty means parse failure.
inline std::vector<PCorrectPair> parse_p_correct(std::string_view completion) {
    std::vector<PCorrectPair> pairs;
    std::size_t pos = 0;
    for (int n = 1; n <= 2; ++n) {
        const std::string answer_marker = "answer" + std::to_string(n) + ":";
        const std::string prob_marker = "probability" + std::to_string(n) + ":";
        std::size_t a = ifind(completion, answer_marker, pos);
        if (a == std::string_view::npos) break;
        std::size_t p = ifind(completion, prob_marker, a + answer_marker.size());
        if (p == std::string_view::npos) break;
        std::string answer(
            trim_view(completion.substr(a + answer_marker.size(), p - a - answer_marker.size())));
        std::optional<double> prob = detail::leading_double(completion.substr(p + prob_marker.size()));
        if (!prob) break;
        pairs.push_back({std::move(answer), *prob});
        pos = p + prob_marker.size();
    }
    return pairs;
}

struct PCorrectOptions {
    std::vector<std::string> extra_abstentions;
};

// Single deterministic call asking for the two most likely answers with
// probabilities; confidence is the larger (clamped) probability. An
// unparseable reply degrades to confidence 0 + abstained, and is counted.
inline SignalRecord p_correct(const QAInstance& instance, JudgeClient& client,
                              JudgeBackend& generator, const PCorrectOptions& options = {},
                              SignalStats* stats = nullptr) {
    JudgeRequest request;
    request.template_id = TemplateId::P_CORRECT;
    request.slots = {{"question", instance.query},
                     {"references", flatten_context(instance.context)}};
    RawCompletion completion = client.complete(generator, request);

    SignalRecord record;
    record.instance_id = instance.id;
    record.confidence_kind = ConfidenceKind::P_CORRECT;
    if (stats) ++stats->instances;

    std::vector<PCorrectPair> pairs = parse_p_correct(completion.text);
    if (pairs.empty()) {
        if (stats) ++stats->parse_failures;
        record.confidence = 0.0;
        record.chosen_answer.clear();
        record.abstained = true;
        return record;
    }
    // Larger probability wins; a tie keeps the first pair.
    const PCorrectPair& kept =
        (pairs.size() == 2 && pairs[1].probability > pairs[0].probability) ? pairs[1] : pairs[0];
    double p = kept.probability;
    if (p < 0.0 || p > 1.0) {
        warn("p_correct: probability " + std::to_string(p) + " clamped to [0,1] for instance '" +
             instance.id + "'");
        if (stats) ++stats->probabilities_clamped;
        p = std::min(1.0, std::max(0.0, p));
    }
    record.confidence = p;
    record.abstained = is_abstention(kept.answer, options.extra_abstentions);
    record.chosen_answer = record.abstained ? std::string() : kept.answer;
    return record;
}

// Merge the sufficiency bit into each signal record. The two id sets must
// match exactly; output is ordered by id.
inline std::vector<SignalRecord> assemble_signals(const std::vector<SufficiencyVerdict>& verdicts,
                                                  const std::vector<SignalRecord>& confidences) {
    std::map<std::string, bool> sufficient_by_id;
    for (const SufficiencyVerdict& v : verdicts) {
        if (!sufficient_by_id.emplace(v.instance_id, v.sufficient).second) {
            throw Error("duplicate verdict for instance '" + v.instance_id + "'");
        }
    }
    std::map<std::string, SignalRecord> merged;
    for (const SignalRecord& r : confidences) {
        auto it = sufficient_by_id.find(r.instance_id);
        if (it == sufficient_by_id.end()) {
            throw Error("no sufficiency verdict for instance '" + r.instance_id + "'");
        }
        SignalRecord copy = r;
        copy.sufficient = it->second;
        if (!merged.emplace(copy.instance_id, std::move(copy)).second) {
            throw Error("duplicate signal record for instance '" + r.instance_id + "'");
        }
    }
    for (const auto& [id, unused] : sufficient_by_id) {
        (void)unused;
        if (merged.find(id) == merged.end()) {
            throw Error("no signal record for instance '" + id + "'");
        }
    }
    std::vector<SignalRecord> out;
    out.reserve(merged.size());
    for (auto& [id, record] : merged) out.push_back(std::move(record));
    return out;
}

}  // namespace ragaudit
