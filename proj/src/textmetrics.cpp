#include "esprit/textmetrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace esprit {

std::vector<std::string> tokenize_text(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else if (std::ispunct(c)) {
            flush();
            out.push_back(std::string(1, static_cast<char>(c)));
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return out;
}

namespace {

void check_paired(const std::vector<TokenSeq>& c,
                  const std::vector<TokenSeq>& r) {
    if (c.size() != r.size())
        throw std::invalid_argument("candidate/reference count mismatch");
    if (c.empty()) throw std::invalid_argument("empty corpus");
}

std::map<std::vector<std::string>, int> ngram_counts(const TokenSeq& toks,
                                                     int n) {
    std::map<std::vector<std::string>, int> counts;
    for (int i = 0; i + n <= static_cast<int>(toks.size()); ++i)
        ++counts[std::vector<std::string>(toks.begin() + i,
                                          toks.begin() + i + n)];
    return counts;
}

}  // namespace

double bleu(const std::vector<TokenSeq>& candidates,
            const std::vector<TokenSeq>& references, int n) {
    check_paired(candidates, references);
    long cand_len = 0, ref_len = 0;
    double log_prec = 0;
    for (int order = 1; order <= n; ++order) {
        long matched = 0, total = 0;
        for (size_t i = 0; i < candidates.size(); ++i) {
            auto cc = ngram_counts(candidates[i], order);
            auto rc = ngram_counts(references[i], order);
            for (const auto& [gram, cnt] : cc) {
                total += cnt;
                auto it = rc.find(gram);
                if (it != rc.end()) matched += std::min(cnt, it->second);
            }
        }
        if (matched == 0 || total == 0) return 0;
        log_prec += std::log(static_cast<double>(matched) / total) / n;
    }
    for (size_t i = 0; i < candidates.size(); ++i) {
        cand_len += static_cast<long>(candidates[i].size());
        ref_len += static_cast<long>(references[i].size());
    }
    const double bp =
        cand_len >= ref_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(ref_len) / cand_len);
    return bp * std::exp(log_prec);
}

namespace {

int lcs_length(const TokenSeq& a, const TokenSeq& b) {
    const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
    std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= m; ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                          : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[m];
}

}  // namespace

double rouge_l(const std::vector<TokenSeq>& candidates,
               const std::vector<TokenSeq>& references) {
    check_paired(candidates, references);
    const double beta2 = 1.2 * 1.2;
    double sum = 0;
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].empty() || references[i].empty()) continue;
        const int lcs = lcs_length(candidates[i], references[i]);
        if (lcs == 0) continue;
        const double p = static_cast<double>(lcs) / candidates[i].size();
        const double r = static_cast<double>(lcs) / references[i].size();
        sum += (1 + beta2) * p * r / (r + beta2 * p);
    }
    return sum / candidates.size();
}

namespace {

// Exact-match alignment built from longest common fragments first, so the
// chunk count stays close to minimal.
struct Alignment {
    int matches = 0;
    int chunks = 0;
};

Alignment align_pair(const TokenSeq& cand, const TokenSeq& ref) {
    const int n = static_cast<int>(cand.size());
    const int m = static_cast<int>(ref.size());
    std::vector<int> cand_to_ref(n, -1);
    std::vector<bool> ref_used(m, false);
    while (true) {
        int best_len = 0, best_i = -1, best_j = -1;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) {
                int len = 0;
                while (i + len < n && j + len < m &&
                       cand_to_ref[i + len] < 0 && !ref_used[j + len] &&
                       cand[i + len] == ref[j + len])
                    ++len;
                if (len > best_len) {
                    best_len = len;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        if (best_len == 0) break;
        for (int k = 0; k < best_len; ++k) {
            cand_to_ref[best_i + k] = best_j + k;
            ref_used[best_j + k] = true;
        }
    }
    Alignment out;
    for (int i = 0; i < n; ++i) {
        if (cand_to_ref[i] < 0) continue;
        ++out.matches;
        if (i == 0 || cand_to_ref[i - 1] != cand_to_ref[i] - 1) ++out.chunks;
    }
    return out;
}

}  // namespace

double meteor(const std::vector<TokenSeq>& candidates,
              const std::vector<TokenSeq>& references) {
    check_paired(candidates, references);
    const double alpha = 0.9;
    double sum = 0;
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].empty() || references[i].empty()) continue;
        const Alignment a = align_pair(candidates[i], references[i]);
        if (a.matches == 0) continue;
        const double p = static_cast<double>(a.matches) / candidates[i].size();
        const double r = static_cast<double>(a.matches) / references[i].size();
        const double f = p * r / (alpha * p + (1 - alpha) * r);
        const double frag = static_cast<double>(a.chunks) / a.matches;
        sum += f * (1 - 0.5 * frag * frag * frag);
    }
    return sum / candidates.size();
}

ConceptLexicon ConceptLexicon::defaults() {
    ConceptLexicon lex;
    lex.concepts["gravity"] = {"falls", "fall",  "drop", "drops",
                               "slope", "land", "lands"};
    lex.concepts["friction"] = {"roll",   "rolls",  "slide", "slides", "trap",
                                "travel", "stuck", "remain", "remains"};
    lex.concepts["collision"] = {"hit",    "hits",    "collide", "collides",
                                 "impact", "land",    "lands",   "pin",
                                 "pins",   "bounce", "bounces"};
    return lex;
}

void ConceptLexicon::set_concept(const std::string& name,
                                 const std::vector<std::string>& words) {
    std::set<std::string> lowered;
    for (const auto& w : words) {
        std::string lw;
        for (unsigned char c : w) lw.push_back(static_cast<char>(std::tolower(c)));
        if (!lw.empty()) lowered.insert(lw);
    }
    concepts[name] = std::move(lowered);
}

std::map<std::string, int> coverage(const TokenSeq& tokens,
                                    const ConceptLexicon& lexicon) {
    std::map<std::string, int> out;
    for (const auto& [name, words] : lexicon.concepts) {
        int n = 0;
        for (const auto& tok : tokens) n += words.count(tok) ? 1 : 0;
        out[name] = n;
    }
    return out;
}

MetricReport evaluate_texts(const std::vector<TokenSeq>& candidates,
                            const std::vector<TokenSeq>& references,
                            const ConceptLexicon& lexicon) {
    MetricReport rep;
    rep.bleu1 = bleu(candidates, references, 1);
    rep.bleu2 = bleu(candidates, references, 2);
    rep.rouge_l = rouge_l(candidates, references);
    rep.meteor = meteor(candidates, references);
    for (const auto& [name, words] : lexicon.concepts) rep.coverage[name] = 0;
    for (const auto& cand : candidates)
        for (const auto& [name, n] : coverage(cand, lexicon))
            rep.coverage[name] += n > 0 ? 1 : 0;
    return rep;
}

json to_json(const MetricReport& r) {
    json j;
    j["bleu1"] = r.bleu1;
    j["bleu2"] = r.bleu2;
    j["rouge_l"] = r.rouge_l;
    j["meteor"] = r.meteor;
    j["coverage"] = json::object();
    for (const auto& [name, n] : r.coverage) j["coverage"][name] = n;
    return j;
}

}  // namespace esprit
