#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ragaudit/core.hpp"

namespace ragaudit {

inline constexpr int kTemplateCatalogVersion = 1;

enum class TemplateId {
    SUFFICIENCY_0SHOT,
    SUFFICIENCY_1SHOT,
    SUFFICIENCY_CHUNK,
    LLMEVAL,
    QA_COT,
    QA_ANSWER_ONLY,
    P_CORRECT,
    P_TRUE_RATE,
};

inline const std::array<TemplateId, 8>& all_template_ids() {
    static const std::array<TemplateId, 8> ids = {
        TemplateId::SUFFICIENCY_0SHOT, TemplateId::SUFFICIENCY_1SHOT,
        TemplateId::SUFFICIENCY_CHUNK, TemplateId::LLMEVAL,
        TemplateId::QA_COT,            TemplateId::QA_ANSWER_ONLY,
        TemplateId::P_CORRECT,         TemplateId::P_TRUE_RATE,
    };
    return ids;
}

inline const char* to_string(TemplateId id) {
    switch (id) {
        case TemplateId::SUFFICIENCY_0SHOT: return "sufficiency_0shot";
        case TemplateId::SUFFICIENCY_1SHOT: return "sufficiency_1shot";
        case TemplateId::SUFFICIENCY_CHUNK: return "sufficiency_chunk";
        case TemplateId::LLMEVAL: return "llmeval";
        case TemplateId::QA_COT: return "qa_cot";
        case TemplateId::QA_ANSWER_ONLY: return "qa_answer_only";
        case TemplateId::P_CORRECT: return "p_correct";
        case TemplateId::P_TRUE_RATE: return "p_true_rate";
    }
    throw Error("unreachable template id");
}

inline TemplateId template_id_from_string(const std::string& name) {
    for (TemplateId id : all_template_ids()) {
        if (name == to_string(id)) return id;
    }
    throw ConfigError("unknown template id: '" + name + "'");
}

namespace detail {

inline const std::string& builtin_template(TemplateId id) {
    static const std::string sufficiency_0shot = R"TMPL(You judge retrieval quality for question answering.

Given a question and retrieved context, decide whether the context alone
contains enough information to produce a definitive answer to the question.
Do not use outside knowledge. Respond with exactly one word: "Sufficient" if
the context is enough to answer the question, or "Insufficient" otherwise.

Question: {{question}}

Context:
{{context}}

Verdict:)TMPL";

    static const std::string sufficiency_1shot = R"TMPL(You judge retrieval quality for question answering.

Given a question and retrieved context, decide whether the context alone
contains enough information to produce a definitive answer to the question.
Do not use outside knowledge. Respond with exactly one word: "Sufficient" if
the context is enough to answer the question, or "Insufficient" otherwise.

Example:
Question: In which year did the French Revolution begin?
Context:
Title: French Revolution
The French Revolution was a period of radical political and societal change
in France. Its ideas are considered fundamental principles of liberal
democracy, and its values remain central to modern political discourse.
Verdict: Insufficient

Now the real case.

Question: {{question}}

Context:
{{context}}

Verdict:)TMPL";

    static const std::string sufficiency_chunk = R"TMPL(You judge retrieval quality for question answering.

Below is one excerpt from a larger set of retrieved documents. Decide whether
this excerpt alone contains enough information to produce a definitive answer
to the question. Do not use outside knowledge. Respond with exactly one word:
"Sufficient" if the excerpt is enough to answer the question, or
"Insufficient" otherwise.

Question: {{question}}

Context:
{{context}}

Verdict:)TMPL";

    static const std::string llmeval = R"TMPL(You grade a model's response to a question against reference answers.

Rate the response as exactly one of:
- correct: the response conveys the same answer as some reference answer
- abstain: the response declines to answer, says it does not know, or says
  the answer cannot be determined
- hallucinate: the response commits to an answer that matches no reference

Question: {{question}}
Reference answers: {{gold_answers}}
Response: {{response}}

Briefly justify your decision, then end your reply with a final line of the
form "Rating: correct" or "Rating: abstain" or "Rating: hallucinate".)TMPL";

    static const std::string qa_cot = R"TMPL(Answer the question using only the references below.

References:
{{references}}

Question: {{question}}

Think step by step about what the references say, then finish your reply with
a line of the form "The answer is: <answer>". If the references do not contain
the information needed, finish with "The answer is: I don't know".)TMPL";

    static const std::string qa_answer_only = R"TMPL(Answer the question using only the references below. Reply with a single
line of the form "The answer is: <answer>" and nothing else. If the
references do not contain the information needed, reply exactly
"The answer is: I don't know".

References:
{{references}}

Question: {{question}})TMPL";

    static const std::string p_correct = R"TMPL(Answer the question using only the references below. Give your two most
likely answers together with the probability that each one is correct, as
numbers between 0 and 1. Use exactly this format on one line:

Answer1: <first answer> Probability1: <number> Answer2: <second answer> Probability2: <number>

If the references do not contain the information needed, use "I don't know"
as an answer.

References:
{{references}}

Question: {{question}})TMPL";

    static const std::string p_true_rate = R"TMPL(A model proposed an answer to a question. Judge whether the proposed answer
is a true answer to the question given the references below. Respond with
exactly one word: "True" or "False".

References:
{{references}}

Question: {{question}}
Proposed answer: {{proposed_answer}}

Judgment:)TMPL";

    switch (id) {
        case TemplateId::SUFFICIENCY_0SHOT: return sufficiency_0shot;
        case TemplateId::SUFFICIENCY_1SHOT: return sufficiency_1shot;
        case TemplateId::SUFFICIENCY_CHUNK: return sufficiency_chunk;
        case TemplateId::LLMEVAL: return llmeval;
        case TemplateId::QA_COT: return qa_cot;
        case TemplateId::QA_ANSWER_ONLY: return qa_answer_only;
        case TemplateId::P_CORRECT: return p_correct;
        case TemplateId::P_TRUE_RATE: return p_true_rate;
    }
    throw Error("unreachable template id");
}

}  // namespace detail

// Placeholders use {{name}} syntax. Slot values are spliced verbatim and are
// never re-scanned, so context text containing braces cannot inject slots.
inline std::string render_template(const std::string& text,
                                   const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, text.size() - pos);
            break;
        }
        out.append(text, pos, open - pos);
        std::size_t close = text.find("}}", open + 2);
        if (close == std::string::npos) {
            throw TemplateError("unterminated '{{' placeholder");
        }
        std::string name = text.substr(open + 2, close - open - 2);
        auto it = slots.find(name);
        if (it == slots.end()) {
            throw TemplateError("missing slot '" + name + "'");
        }
        out += it->second;
        pos = close + 2;
    }
    return out;
}

// Placeholder names in order of first appearance.
inline std::vector<std::string> template_slots(const std::string& text) {
    std::vector<std::string> names;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find("{{", pos);
        if (open == std::string::npos) break;
        std::size_t close = text.find("}}", open + 2);
        if (close == std::string::npos) break;
        std::string name = text.substr(open + 2, close - open - 2);
        if (std::find(names.begin(), names.end(), name) == names.end()) {
            names.push_back(name);
        }
        pos = close + 2;
    }
    return names;
}

// Prompt texts for every TemplateId. Defaults are compiled in; a catalog
// opened on a directory replaces any template that has a matching
// "<template_id>.txt" file there.
class TemplateCatalog {
  public:
    TemplateCatalog() {
        for (TemplateId id : all_template_ids()) {
            texts_[id] = detail::builtin_template(id);
        }
    }

    explicit TemplateCatalog(const std::filesystem::path& dir) : TemplateCatalog() {
        if (!std::filesystem::is_directory(dir)) {
            throw ConfigError("template directory not found: " + dir.string());
        }
        for (TemplateId id : all_template_ids()) {
            std::filesystem::path file = dir / (std::string(to_string(id)) + ".txt");
            if (!std::filesystem::exists(file)) continue;
            std::ifstream in(file, std::ios::binary);
            if (!in) throw ConfigError("cannot read template file: " + file.string());
            std::ostringstream buf;
            buf << in.rdbuf();
            std::string text = buf.str();
            if (trim_view(text).empty()) {
                throw TemplateError("template file is empty: " + file.string());
            }
            texts_[id] = std::move(text);
        }
    }

    const std::string& text(TemplateId id) const { return texts_.at(id); }

    std::string render(TemplateId id, const std::map<std::string, std::string>& slots) const {
        try {
            return render_template(texts_.at(id), slots);
        } catch (const TemplateError& e) {
            throw TemplateError(std::string(e.what()) + " (template " + to_string(id) + ")");
        }
    }

  private:
    std::map<TemplateId, std::string> texts_;
};

}  // namespace ragaudit
