#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragaudit/core.hpp"
#include "ragaudit/templates.hpp"

namespace ragaudit {

struct Sampling {
    double temperature = 0.0;
    std::optional<std::uint64_t> seed;
    int max_output_tokens = 1024;
};

struct JudgeRequest {
    TemplateId template_id = TemplateId::SUFFICIENCY_0SHOT;
    std::map<std::string, std::string> slots;
    Sampling sampling;
};

struct RawCompletion {
    std::string text;  // may be empty; callers must handle
    std::string backend;
    std::int64_t latency_ms = 0;
    bool from_cache = false;
};

// Completion source (remote service, scripted mock, ...). Implementations
// must be safe for concurrent complete() calls; the mock backends are
// deterministic regardless of scheduling.
class JudgeBackend {
  public:
    virtual ~JudgeBackend() = default;
    virtual const std::string& name() const = 0;
    // Model identity for cache keying; defaults to the backend name.
    virtual const std::string& model() const { return name(); }
    virtual std::size_t context_window() const = 0;
    // Returns raw completion text. Throws TransportError on retryable
    // failures.
    virtual std::string complete(const std::string& prompt, const Sampling& sampling) = 0;
};

enum class Rating { Correct, Abstain, Hallucinate };

inline const char* to_string(Rating r) {
    switch (r) {
        case Rating::Correct: return "correct";
        case Rating::Abstain: return "abstain";
        case Rating::Hallucinate: return "hallucinate";
    }
    throw Error("unreachable rating");
}

inline Rating rating_from_string(const std::string& s) {
    if (s == "correct") return Rating::Correct;
    if (s == "abstain") return Rating::Abstain;
    if (s == "hallucinate") return Rating::Hallucinate;
    throw ParseError("unknown rating: '" + s + "'");
}

// Keyword rules, case-insensitive over the whole completion. "insufficient"
// is checked first because it contains "sufficient". Absent keywords yield
// parse-failure (nullopt); the caller decides the fallback policy.
inline std::optional<bool> parse_sufficiency(std::string_view completion) {
    if (icontains(completion, "insufficient")) return false;
    if (icontains(completion, "sufficient")) return true;
    return std::nullopt;
}

// Reads the grade from the text after the last "Rating:" marker when one is
// present, else from the whole completion. "hallucinat" is checked before
// "abstain"/"correct", and "incorrect" before "correct", so prose like
// "the answer is incorrect" cannot be mistaken for a correct grade.
inline std::optional<Rating> parse_llmeval(std::string_view completion) {
    std::string_view region = completion;
    std::size_t marker = irfind(completion, "Rating:");
    if (marker != std::string_view::npos) {
        region = completion.substr(marker + 7);
    }
    if (icontains(region, "hallucinat")) return Rating::Hallucinate;
    if (icontains(region, "abstain")) return Rating::Abstain;
    if (icontains(region, "incorrect")) return Rating::Hallucinate;
    if (icontains(region, "correct")) return Rating::Correct;
    return std::nullopt;
}

// "false" is checked first because mandated outputs are one word and
// negations ("not true") must not read as true.
inline std::optional<bool> parse_true_false(std::string_view completion) {
    if (icontains(completion, "false")) return false;
    if (icontains(completion, "true")) return true;
    return std::nullopt;
}

inline const std::vector<std::string>& abstention_lexicon() {
    static const std::vector<std::string> entries = {
        "i don't know", "i do not know", "unknown", "cannot be determined",
        "not enough information",
    };
    return entries;
}

// Exact case-insensitive match of the whole (trimmed) answer against the
// lexicon; the empty answer always counts as abstaining.
inline bool is_abstention(std::string_view answer,
                          const std::vector<std::string>& extra_entries = {}) {
    std::string lowered = to_lower(trim_view(answer));
    if (lowered.empty()) return true;
    for (const std::string& e : abstention_lexicon()) {
        if (lowered == to_lower(e)) return true;
    }
    for (const std::string& e : extra_entries) {
        if (lowered == to_lower(e)) return true;
    }
    return false;
}

struct ExtractedAnswer {
    std::string answer;
    bool abstained = false;
};

// Takes the text after the last case-insensitive "The answer is:" marker,
// trimmed, with one trailing period stripped; without a marker the whole
// trimmed completion is the answer.
inline ExtractedAnswer extract_answer(std::string_view completion,
                                      const std::vector<std::string>& extra_abstentions = {}) {
    ExtractedAnswer out;
    constexpr std::string_view kMarker = "The answer is:";
    std::size_t marker = irfind(completion, kMarker);
    if (marker != std::string_view::npos) {
        std::string_view tail = completion.substr(marker + kMarker.size());
        std::string answer = trim(std::string(tail));
        if (!answer.empty() && answer.back() == '.') {
            answer.pop_back();
            answer = trim(answer);
        }
        out.answer = std::move(answer);
    } else {
        out.answer = trim(std::string(completion));
    }
    out.abstained = is_abstention(out.answer, extra_abstentions);
    return out;
}

}  // namespace ragaudit
