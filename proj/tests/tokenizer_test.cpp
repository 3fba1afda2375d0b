#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>

#include "ragaudit/tokenizer.hpp"

using namespace ragaudit;

TEST_CASE("approx tokenizer splits on whitespace") {
    ApproxTokenizer tok;
    CHECK(tok.count("") == 0);
    CHECK(tok.count("   \t\n ") == 0);
    CHECK(tok.count("one") == 1);
    CHECK(tok.count("one two three") == 3);
    CHECK(tok.count("  padded   words  ") == 2);
}

TEST_CASE("approx tokenizer splits long runs into 8-character pieces") {
    ApproxTokenizer tok;
    // 8 chars → 1 token; 9 → 2; 16 → 2; 17 → 3
    CHECK(tok.count("abcdefgh") == 1);
    CHECK(tok.count("abcdefghi") == 2);
    CHECK(tok.count(std::string(16, 'x')) == 2);
    CHECK(tok.count(std::string(17, 'x')) == 3);

    auto spans = tok.spans("abcdefghij");
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].begin == 0);
    CHECK(spans[0].end == 8);
    CHECK(spans[1].begin == 8);
    CHECK(spans[1].end == 10);
}

TEST_CASE("approx tokenizer counts code points, not bytes") {
    ApproxTokenizer tok;
    // 8 two-byte code points = 16 bytes but still one token
    std::string two_byte = "\xc3\xa9";  // é
    std::string word;
    for (int i = 0; i < 8; ++i) word += two_byte;
    CHECK(tok.count(word) == 1);
    word += two_byte;  // 9 code points
    CHECK(tok.count(word) == 2);
}

TEST_CASE("spans are non-overlapping, increasing, and never cover whitespace") {
    std::mt19937 rng(11);
    ApproxTokenizer tok;
    for (int round = 0; round < 300; ++round) {
        std::string text;
        std::size_t len = rng() % 120;
        for (std::size_t i = 0; i < len; ++i) {
            int r = rng() % 10;
            text.push_back(r < 3 ? ' ' : static_cast<char>('a' + rng() % 26));
        }
        std::size_t prev_end = 0;
        for (const TokenSpan& s : tok.spans(text)) {
            CHECK(s.begin >= prev_end);
            CHECK(s.begin < s.end);
            CHECK(s.end <= text.size());
            for (std::size_t i = s.begin; i < s.end; ++i) {
                CHECK_FALSE(detail::is_space_byte(text[i]));
            }
            prev_end = s.end;
        }
    }
}

TEST_CASE("prefix keeps whole tokens and is monotone") {
    ApproxTokenizer tok;
    const std::string text = "alpha beta gamma deltadeltadelta epsilon";
    CHECK(tok.prefix(text, 0).empty());
    CHECK(tok.prefix(text, 2) == "alpha beta");
    CHECK(tok.prefix(text, 1000) == text);

    std::mt19937 rng(23);
    for (int round = 0; round < 100; ++round) {
        std::string s;
        std::size_t len = rng() % 80;
        for (std::size_t i = 0; i < len; ++i) {
            s.push_back(rng() % 5 == 0 ? ' ' : static_cast<char>('a' + rng() % 26));
        }
        std::size_t total = tok.count(s);
        for (std::size_t budget : {std::size_t(1), total / 2, total}) {
            if (budget == 0) continue;
            std::string_view p = tok.prefix(s, budget);
            CHECK(tok.count(p) == std::min(budget, total));
            // prefix of a prefix: cutting twice changes nothing
            CHECK(tok.prefix(p, budget) == p);
        }
    }
}

TEST_CASE("whitespace tokenizer has no run limit") {
    WhitespaceTokenizer tok;
    CHECK(tok.count(std::string(100, 'x')) == 1);
    CHECK(tok.id() == "whitespace");
}

TEST_CASE("tokenizer factory") {
    CHECK(make_tokenizer("approx8")->id() == "approx8");
    CHECK(make_tokenizer("")->id() == "approx8");
    CHECK(make_tokenizer("whitespace")->id() == "whitespace");
    CHECK_THROWS_AS(make_tokenizer("bpe"), ConfigError);
}
