#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "esprit/serialize.hpp"

namespace esprit {

// Lowercases and splits on whitespace and punctuation; punctuation characters
// become their own tokens and participate in n-grams.
std::vector<std::string> tokenize_text(const std::string& text);

using TokenSeq = std::vector<std::string>;

// Corpus BLEU-n: geometric mean of clipped n-gram precisions up to n with the
// standard brevity penalty. One reference per candidate.
double bleu(const std::vector<TokenSeq>& candidates,
            const std::vector<TokenSeq>& references, int n);

// Mean per-pair LCS F-score with beta = 1.2.
double rouge_l(const std::vector<TokenSeq>& candidates,
               const std::vector<TokenSeq>& references);

// Simplified exact-match METEOR: F_mean = P*R / (alpha*P + (1-alpha)*R) with
// alpha = 0.9, fragmentation penalty 0.5 * (chunks/matches)^3.
double meteor(const std::vector<TokenSeq>& candidates,
              const std::vector<TokenSeq>& references);

struct ConceptLexicon {
    std::map<std::string, std::set<std::string>> concepts;

    static ConceptLexicon defaults();
    // Replaces one concept's word set (words lowercased).
    void set_concept(const std::string& name,
                     const std::vector<std::string>& words);
};

// Token occurrences per concept; a token may count toward several concepts.
std::map<std::string, int> coverage(const TokenSeq& tokens,
                                    const ConceptLexicon& lexicon);

struct MetricReport {
    double bleu1 = 0, bleu2 = 0, rouge_l = 0, meteor = 0;
    std::map<std::string, int> coverage;
};

MetricReport evaluate_texts(const std::vector<TokenSeq>& candidates,
                            const std::vector<TokenSeq>& references,
                            const ConceptLexicon& lexicon);

json to_json(const MetricReport& r);

}  // namespace esprit
