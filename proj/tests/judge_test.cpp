#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "ragaudit/judge.hpp"

using namespace ragaudit;

TEST_CASE("parse_sufficiency maps keywords case-insensitively") {
    CHECK(parse_sufficiency("Sufficient") == true);
    CHECK(parse_sufficiency("Verdict: SUFFICIENT") == true);
    CHECK(parse_sufficiency("insufficient context — the passage lacks the dates") == false);
    CHECK(parse_sufficiency("maybe") == std::nullopt);
    CHECK(parse_sufficiency("") == std::nullopt);
    // "insufficient" contains "sufficient"; the longer keyword must win
    CHECK(parse_sufficiency("Insufficient") == false);
    CHECK(parse_sufficiency("the context is sufficient, not insufficient") == false);
}

TEST_CASE("parse_llmeval reads the region after the last rating marker") {
    CHECK(parse_llmeval("Rating: correct") == Rating::Correct);
    CHECK(parse_llmeval("Rating: abstain") == Rating::Abstain);
    CHECK(parse_llmeval("the answer is wrong. Rating: hallucinate") == Rating::Hallucinate);
    CHECK(parse_llmeval("RATING: Correct") == Rating::Correct);
    // only the last marker counts
    CHECK(parse_llmeval("Rating: correct ... on reflection Rating: abstain") == Rating::Abstain);
    // prompts discuss all three words; text before the marker must not vote
    CHECK(parse_llmeval("correct or hallucinate? Rating: abstain") == Rating::Abstain);
    // "incorrect" in the verdict region means hallucinate, not correct
    CHECK(parse_llmeval("Rating: incorrect") == Rating::Hallucinate);
    CHECK(parse_llmeval("no marker at all") == std::nullopt);
    CHECK(parse_llmeval("Rating: shrug") == std::nullopt);
}

TEST_CASE("parse_true_false prefers false when both appear") {
    CHECK(parse_true_false("True") == true);
    CHECK(parse_true_false("Judgment: FALSE") == false);
    CHECK(parse_true_false("true, but actually false") == false);
    CHECK(parse_true_false("hmm") == std::nullopt);
}

TEST_CASE("abstention lexicon matches whole trimmed answers") {
    CHECK(is_abstention("I don't know"));
    CHECK(is_abstention("  UNKNOWN  "));
    CHECK(is_abstention("i do not know"));
    CHECK(is_abstention("Cannot be determined"));
    CHECK(is_abstention("not enough information"));
    CHECK(is_abstention(""));
    CHECK_FALSE(is_abstention("Paris"));
    // exact matches only, never substrings
    CHECK_FALSE(is_abstention("I don't know, maybe Paris"));
    CHECK_FALSE(is_abstention("the unknown soldier"));
    CHECK(abstention_lexicon().size() == 5);
    // config can extend the lexicon
    CHECK(is_abstention("no comment", {"no comment"}));
    CHECK_FALSE(is_abstention("no comment"));
}

TEST_CASE("extract_answer takes the text after the last marker") {
    ExtractedAnswer a = extract_answer("Reasoning... The answer is: Paris.");
    CHECK(a.answer == "Paris");
    CHECK_FALSE(a.abstained);

    ExtractedAnswer b = extract_answer("The answer is: I don't know");
    CHECK(b.answer == "I don't know");
    CHECK(b.abstained);

    ExtractedAnswer c = extract_answer("");
    CHECK(c.answer.empty());
    CHECK(c.abstained);

    // last marker wins
    ExtractedAnswer d = extract_answer("The answer is: draft. Wait. The answer is: final");
    CHECK(d.answer == "final");

    // marker matching is case-insensitive
    ExtractedAnswer e = extract_answer("the ANSWER IS: Berlin.");
    CHECK(e.answer == "Berlin");

    // no marker: the whole trimmed text is the answer
    ExtractedAnswer f = extract_answer("  Madrid  ");
    CHECK(f.answer == "Madrid");
    CHECK_FALSE(f.abstained);

    // only one trailing period is stripped
    ExtractedAnswer g = extract_answer("The answer is: etc..");
    CHECK(g.answer == "etc.");
}

TEST_CASE("extract_answer on the marker suffix equals extracting from the suffix") {
    const std::string completion = "chain of thought here. The answer is: 42";
    ExtractedAnswer whole = extract_answer(completion);
    ExtractedAnswer suffix = extract_answer("The answer is: 42");
    CHECK(whole.answer == suffix.answer);
    CHECK(whole.abstained == suffix.abstained);
}

TEST_CASE("ratings round-trip through strings") {
    for (Rating r : {Rating::Correct, Rating::Abstain, Rating::Hallucinate}) {
        CHECK(rating_from_string(to_string(r)) == r);
    }
    CHECK_THROWS_AS(rating_from_string("wat"), ParseError);
}
