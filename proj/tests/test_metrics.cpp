#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "esprit/textmetrics.hpp"

using namespace esprit;

namespace {

std::vector<TokenSeq> corpus(std::initializer_list<const char*> texts) {
    std::vector<TokenSeq> out;
    for (const char* t : texts) out.push_back(tokenize_text(t));
    return out;
}

}  // namespace

TEST_CASE("tokenizer lowercases and isolates punctuation") {
    CHECK(tokenize_text("The red Ball falls.") ==
          TokenSeq{"the", "red", "ball", "falls", "."});
    CHECK(tokenize_text("a,b  c's") == TokenSeq{"a", ",", "b", "c", "'", "s"});
    CHECK(tokenize_text("   ") == TokenSeq{});
}

TEST_CASE("bleu-1 pinned value for one-word-shorter candidate") {
    auto c = corpus({"the red ball falls"});
    auto r = corpus({"the red ball falls down"});
    // all four unigrams match; brevity penalty exp(1 - 5/4)
    CHECK(std::abs(bleu(c, r, 1) - std::exp(1.0 - 5.0 / 4.0)) < 1e-12);
    CHECK(std::abs(bleu(c, r, 1) - 0.7788) < 1e-4);
    // all three bigrams match too, so bleu-2 equals the brevity penalty
    CHECK(std::abs(bleu(c, r, 2) - std::exp(1.0 - 5.0 / 4.0)) < 1e-12);
}

TEST_CASE("bleu clips repeated n-grams against the reference") {
    auto c = corpus({"the the the the"});
    auto r = corpus({"the cat sat down"});
    // "the" appears once in the reference, clipped to 1 of 4
    CHECK(std::abs(bleu(c, r, 1) - 0.25) < 1e-12);
    CHECK(bleu(c, r, 2) == 0.0);
}

TEST_CASE("bleu corpus statistics pool before the geometric mean") {
    auto c = corpus({"a b", "c d"});
    auto r = corpus({"a b", "x y"});
    // pooled unigrams: 2 of 4 match; brevity penalty 1
    CHECK(std::abs(bleu(c, r, 1) - 0.5) < 1e-12);
}

TEST_CASE("identical corpora score 1 and disjoint corpora score 0") {
    auto c = corpus({"the ball rolls .", "a bar tips"});
    CHECK(std::abs(bleu(c, c, 2) - 1.0) < 1e-12);
    CHECK(std::abs(rouge_l(c, c) - 1.0) < 1e-12);
    CHECK(std::abs(meteor(c, c) -
                   (1.0 - 0.5 / (4.0 * 4.0 * 4.0) + 1.0 -
                    0.5 / (3.0 * 3.0 * 3.0)) /
                       2.0) < 1e-12);
    auto d = corpus({"x y z w", "p q r"});
    CHECK(bleu(c, d, 1) == 0.0);
    CHECK(rouge_l(c, d) == 0.0);
    CHECK(meteor(c, d) == 0.0);
}

TEST_CASE("rouge-l pinned value from a length-3 subsequence") {
    auto c = corpus({"a b c d"});
    auto r = corpus({"a c d e"});
    // lcs "a c d": precision = recall = 3/4, so f equals 3/4 for any beta
    CHECK(std::abs(rouge_l(c, r) - 0.75) < 1e-4);
}

TEST_CASE("rouge-l weights recall more through beta") {
    auto c = corpus({"a b"});
    auto r = corpus({"a b c d"});
    const double p = 1.0, rr = 0.5, b2 = 1.44;
    CHECK(std::abs(rouge_l(c, r) - (1 + b2) * p * rr / (rr + b2 * p)) < 1e-12);
}

TEST_CASE("meteor pinned value for an identical four-token pair") {
    auto c = corpus({"the ball rolls down"});
    // one chunk of four matches: 1 - 0.5 * (1/4)^3
    CHECK(std::abs(meteor(c, c) - 0.9921875) < 1e-12);
    CHECK(std::abs(meteor(c, c) - 0.9922) < 1e-4);
}

TEST_CASE("meteor penalizes fragmentation") {
    auto whole = corpus({"a b c d"});
    auto split = corpus({"a b x c d"});
    auto r = corpus({"a b c d"});
    // same matches, 1 chunk vs 2 chunks
    CHECK(meteor(split, r) < meteor(whole, r));
    const double p = 4.0 / 5.0, rr = 1.0;
    const double f = p * rr / (0.9 * p + 0.1 * rr);
    const double frag = 2.0 / 4.0;
    CHECK(std::abs(meteor(split, r) - f * (1 - 0.5 * frag * frag * frag)) <
          1e-12);
}

TEST_CASE("metrics are invariant under vocabulary renaming") {
    auto c1 = corpus({"the red ball falls", "it rolls away"});
    auto r1 = corpus({"the red ball falls down", "it rolls off"});
    auto c2 = corpus({"a b c d", "e f g"});
    auto r2 = corpus({"a b c d h", "e f i"});
    CHECK(std::abs(bleu(c1, r1, 2) - bleu(c2, r2, 2)) < 1e-12);
    CHECK(std::abs(rouge_l(c1, r1) - rouge_l(c2, r2)) < 1e-12);
    CHECK(std::abs(meteor(c1, r1) - meteor(c2, r2)) < 1e-12);
}

TEST_CASE("corpus metrics do not depend on pair order") {
    auto c = corpus({"the ball falls", "a bar tips over", "it rolls"});
    auto r = corpus({"the ball drops", "the bar tips", "it rolls away"});
    auto cp = std::vector<TokenSeq>{c[2], c[0], c[1]};
    auto rp = std::vector<TokenSeq>{r[2], r[0], r[1]};
    CHECK(std::abs(bleu(c, r, 2) - bleu(cp, rp, 2)) < 1e-12);
    CHECK(std::abs(rouge_l(c, r) - rouge_l(cp, rp)) < 1e-12);
    CHECK(std::abs(meteor(c, r) - meteor(cp, rp)) < 1e-12);
}

TEST_CASE("mismatched corpus sizes are rejected") {
    auto c = corpus({"a b"});
    auto r = corpus({"a b", "c d"});
    CHECK_THROWS_AS(bleu(c, r, 1), std::invalid_argument);
    CHECK_THROWS_AS(rouge_l(c, r), std::invalid_argument);
    CHECK_THROWS_AS(meteor(c, r), std::invalid_argument);
    CHECK_THROWS_AS(bleu({}, {}, 1), std::invalid_argument);
}

TEST_CASE("default lexicon coverage on canonical sentences") {
    const ConceptLexicon lex = ConceptLexicon::defaults();
    auto cov =
        coverage(tokenize_text("the ball falls and rolls then hits the bar"),
                 lex);
    CHECK(cov["gravity"] == 1);
    CHECK(cov["friction"] == 1);
    CHECK(cov["collision"] == 1);

    cov = coverage(tokenize_text("it lands on the floor"), lex);
    CHECK(cov["gravity"] == 1);
    CHECK(cov["collision"] == 1);
    CHECK(cov["friction"] == 0);

    cov = coverage(tokenize_text("nothing relevant here"), lex);
    CHECK(cov["gravity"] == 0);
    CHECK(cov["friction"] == 0);
    CHECK(cov["collision"] == 0);
}

TEST_CASE("lexicon override replaces a concept word set") {
    ConceptLexicon lex = ConceptLexicon::defaults();
    lex.set_concept("gravity", {"Plummets", "sinks"});
    auto cov = coverage(tokenize_text("the ball plummets and falls"), lex);
    CHECK(cov["gravity"] == 1);  // "falls" no longer counts
    lex.set_concept("gravity", {"plummets", "falls"});
    cov = coverage(tokenize_text("the ball plummets and falls"), lex);
    CHECK(cov["gravity"] == 2);
}

TEST_CASE("evaluate_texts aggregates sentence-level concept hits") {
    auto c = corpus({"the ball falls", "it rolls away", "nothing happens"});
    auto r = corpus({"the ball falls", "it rolls off", "nothing happens"});
    MetricReport rep = evaluate_texts(c, r, ConceptLexicon::defaults());
    CHECK(rep.coverage["gravity"] == 1);    // only the first sentence
    CHECK(rep.coverage["friction"] == 1);   // only the second
    CHECK(rep.coverage["collision"] == 0);
    CHECK(rep.bleu1 == doctest::Approx(bleu(c, r, 1)));
    json j = to_json(rep);
    CHECK(j["coverage"]["gravity"] == 1);
    CHECK(j["rouge_l"].get<double>() == doctest::Approx(rep.rouge_l));
}
