#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ragaudit/client.hpp"
#include "ragaudit/dataset.hpp"
#include "ragaudit/judge.hpp"
#include "ragaudit/normalize.hpp"
#include "ragaudit/sufficiency.hpp"

namespace ragaudit {

// True iff any normalized gold answer is a substring of the normalized
// response. A gold answer that normalizes to nothing never matches.
inline bool lexical_match(const std::string& response, const std::vector<std::string>& gold_answers) {
    if (gold_answers.empty()) throw Error("lexical_match needs at least one gold answer");
    const std::string haystack = normalize(response);
    for (const std::string& gold : gold_answers) {
        const std::string needle = normalize(gold);
        if (!needle.empty() && haystack.find(needle) != std::string::npos) return true;
    }
    return false;
}

enum class RatingSource { LEXICAL, LLMEVAL, ABSTAIN_RULE };

inline const char* to_string(RatingSource s) {
    switch (s) {
        case RatingSource::LEXICAL: return "lexical";
        case RatingSource::LLMEVAL: return "llmeval";
        case RatingSource::ABSTAIN_RULE: return "abstain_rule";
    }
    throw Error("unreachable rating source");
}

inline RatingSource rating_source_from_string(const std::string& name) {
    if (name == "lexical") return RatingSource::LEXICAL;
    if (name == "llmeval") return RatingSource::LLMEVAL;
    if (name == "abstain_rule") return RatingSource::ABSTAIN_RULE;
    throw ParseError("unknown rating source: '" + name + "'");
}

struct ResponseRecord {
    std::string instance_id;
    std::string response_text;
    std::string extracted_answer;
    Rating rating = Rating::Abstain;
    RatingSource rating_source = RatingSource::ABSTAIN_RULE;

    friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

struct ReportStats {
    std::uint64_t rated = 0;
    std::uint64_t abstain_rule = 0;
    std::uint64_t lexical = 0;
    std::uint64_t llmeval_calls = 0;
    std::uint64_t parse_failures = 0;
};

// Fixed rule order: abstention beats everything, then the lexical pre-match,
// then one LLM grading call. An unparseable grade counts as Hallucinate
// (conservative for the predictor's training labels) and is tallied.
inline ResponseRecord rate_response(const QAInstance& instance, const std::string& response,
                                    JudgeClient& client, JudgeBackend& evaluator,
                                    const std::vector<std::string>& extra_abstentions = {},
                                    ReportStats* stats = nullptr) {
    ResponseRecord record;
    record.instance_id = instance.id;
    record.response_text = response;
    if (stats) ++stats->rated;

    ExtractedAnswer extracted = extract_answer(response, extra_abstentions);
    record.extracted_answer = extracted.answer;
    if (extracted.abstained) {
        record.rating = Rating::Abstain;
        record.rating_source = RatingSource::ABSTAIN_RULE;
        if (stats) ++stats->abstain_rule;
        return record;
    }
    if (lexical_match(response, instance.gold_answers)) {
        record.rating = Rating::Correct;
        record.rating_source = RatingSource::LEXICAL;
        if (stats) ++stats->lexical;
        return record;
    }

    std::string gold_joined;
    for (std::size_t i = 0; i < instance.gold_answers.size(); ++i) {
        if (i > 0) gold_joined += "; ";
        gold_joined += instance.gold_answers[i];
    }
    JudgeRequest request;
    request.template_id = TemplateId::LLMEVAL;
    request.slots = {{"question", instance.query},
                     {"gold_answers", gold_joined},
                     {"response", response}};
    RawCompletion completion = client.complete(evaluator, request);
    if (stats) ++stats->llmeval_calls;

    std::optional<Rating> rating = parse_llmeval(completion.text);
    if (!rating) {
        if (stats) ++stats->parse_failures;
        record.rating = Rating::Hallucinate;
    } else {
        record.rating = *rating;
    }
    record.rating_source = RatingSource::LLMEVAL;
    return record;
}

enum class Stratum { SUFFICIENT, INSUFFICIENT, ALL };

inline const char* to_string(Stratum s) {
    switch (s) {
        case Stratum::SUFFICIENT: return "sufficient";
        case Stratum::INSUFFICIENT: return "insufficient";
        case Stratum::ALL: return "all";
    }
    throw Error("unreachable stratum");
}

struct StratifiedBreakdown {
    Stratum stratum = Stratum::ALL;
    std::size_t n = 0;
    std::size_t n_correct = 0;
    std::size_t n_abstain = 0;
    std::size_t n_hallucinate = 0;
    double pct_correct = 0.0;
    double pct_abstain = 0.0;
    double pct_hallucinate = 0.0;
    bool empty_stratum = false;

    friend bool operator==(const StratifiedBreakdown&, const StratifiedBreakdown&) = default;
};

namespace detail {

// count/n as a percentage with one decimal, rounded half-up, computed in
// integers so 52.25 -> 52.3 regardless of binary representation.
inline double pct_one_decimal(std::size_t count, std::size_t n) {
    if (n == 0) return 0.0;
    std::uint64_t x = static_cast<std::uint64_t>(count) * 1000;
    std::uint64_t tenths = x / n + (2 * (x % n) >= n ? 1 : 0);
    return static_cast<double>(tenths) / 10.0;
}

}  // namespace detail

// Percentages of Correct / Abstain / Hallucinate per sufficiency stratum,
// one decimal place, round-half-up. Output order: sufficient, insufficient,
// all.
inline std::vector<StratifiedBreakdown> stratify(const std::vector<ResponseRecord>& records,
                                                 const std::vector<SufficiencyVerdict>& verdicts) {
    std::map<std::string, bool> sufficient_by_id;
    for (const SufficiencyVerdict& v : verdicts) sufficient_by_id[v.instance_id] = v.sufficient;

    StratifiedBreakdown suff, insuff, all;
    suff.stratum = Stratum::SUFFICIENT;
    insuff.stratum = Stratum::INSUFFICIENT;
    all.stratum = Stratum::ALL;

    auto add = [](StratifiedBreakdown& b, Rating r) {
        ++b.n;
        switch (r) {
            case Rating::Correct: ++b.n_correct; break;
            case Rating::Abstain: ++b.n_abstain; break;
            case Rating::Hallucinate: ++b.n_hallucinate; break;
        }
    };
    for (const ResponseRecord& r : records) {
        auto it = sufficient_by_id.find(r.instance_id);
        if (it == sufficient_by_id.end()) {
            throw MissingInputError("no sufficiency verdict for instance '" + r.instance_id + "'");
        }
        add(it->second ? suff : insuff, r.rating);
        add(all, r.rating);
    }

    std::vector<StratifiedBreakdown> out{suff, insuff, all};
    for (StratifiedBreakdown& b : out) {
        if (b.n == 0) {
            b.empty_stratum = true;
            continue;
        }
        b.pct_correct = detail::pct_one_decimal(b.n_correct, b.n);
        b.pct_abstain = detail::pct_one_decimal(b.n_abstain, b.n);
        b.pct_hallucinate = detail::pct_one_decimal(b.n_hallucinate, b.n);
    }
    return out;
}

}  // namespace ragaudit
