#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fifa/error.hpp"
#include "fifa/mask.hpp"

namespace fifa {

// Shared tokenization rule for all text metrics (versioned; changing it
// changes every text score): lowercase, then split into maximal runs of
// [a-z0-9]; everything else is a separator and is dropped.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char raw : text) {
        char c = raw;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

struct TextPair {
    std::vector<std::string> candidate;
    std::vector<std::vector<std::string>> references;
};

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

enum class BinaryLabel { Real, Fake };

struct BinaryOutcome {
    BinaryLabel predicted;
    BinaryLabel actual;
};

struct ClassificationMetrics {
    long long tp = 0, tn = 0, fp = 0, fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double apcer = 0.0;  // fakes classified real
    double bpcer = 0.0;  // reals classified fake
    double acer = 0.0;
};

// Confusion-matrix metrics with fake as the positive class. ACER needs both
// classes present in the ground truth; otherwise DegenerateClassDistribution.
inline ClassificationMetrics classification_metrics(
    const std::vector<BinaryOutcome>& outcomes) {
    if (outcomes.empty())
        throw make_error("EmptyOutcomes", "no samples to score");
    ClassificationMetrics m;
    for (const auto& o : outcomes) {
        bool pred_fake = o.predicted == BinaryLabel::Fake;
        bool is_fake = o.actual == BinaryLabel::Fake;
        if (pred_fake && is_fake) ++m.tp;
        else if (pred_fake && !is_fake) ++m.fp;
        else if (!pred_fake && is_fake) ++m.fn;
        else ++m.tn;
    }
    const long long positives = m.tp + m.fn, negatives = m.tn + m.fp;
    const long long n = positives + negatives;
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(n);
    m.precision = m.tp + m.fp > 0
                      ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp)
                      : 0.0;
    m.recall = positives > 0
                   ? static_cast<double>(m.tp) / static_cast<double>(positives)
                   : 0.0;
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    if (positives == 0 || negatives == 0)
        throw make_error("DegenerateClassDistribution",
                         "ACER needs at least one real and one fake");
    m.apcer = static_cast<double>(m.fn) / static_cast<double>(positives);
    m.bpcer = static_cast<double>(m.fp) / static_cast<double>(negatives);
    m.acer = 0.5 * (m.apcer + m.bpcer);
    return m;
}

// ---------------------------------------------------------------------------
// Mask mIoU
// ---------------------------------------------------------------------------

enum class EmptyPairPolicy { ScoreOne, Skip };

inline double iou(const BitMask& a, const BitMask& b) {
    if (!a.same_size(b))
        throw make_error("DimensionMismatch", "iou operands differ in size");
    long long inter = 0, uni = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        bool va = a.at(i) != 0, vb = b.at(i) != 0;
        if (va && vb) ++inter;
        if (va || vb) ++uni;
    }
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

// Both-empty pairs score 1.0 by default: Loc. ground truth is legitimately
// empty for real images.
inline double miou(const std::vector<BitMask>& preds,
                   const std::vector<BitMask>& gts,
                   EmptyPairPolicy policy = EmptyPairPolicy::ScoreOne) {
    if (preds.size() != gts.size())
        throw make_error("DimensionMismatch", "pred/gt list lengths differ");
    if (preds.empty()) throw make_error("EmptyCorpus", "no mask pairs");
    double sum = 0.0;
    long long scored = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (policy == EmptyPairPolicy::Skip && preds[i].area() == 0 &&
            gts[i].area() == 0)
            continue;
        sum += iou(preds[i], gts[i]);
        ++scored;
    }
    return scored > 0 ? sum / static_cast<double>(scored) : 1.0;
}

// ---------------------------------------------------------------------------
// n-gram utilities
// ---------------------------------------------------------------------------

namespace detail {

using NgramCounts = std::map<std::vector<std::string>, long long>;

inline NgramCounts ngram_counts(const std::vector<std::string>& tokens, int n) {
    NgramCounts counts;
    if (static_cast<int>(tokens.size()) >= n)
        for (size_t i = 0; i + n <= tokens.size(); ++i)
            ++counts[{tokens.begin() + i, tokens.begin() + i + n}];
    return counts;
}

inline size_t lcs_length(const std::vector<std::string>& a,
                         const std::vector<std::string>& b) {
    std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                          : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// BLEU-4 and ROUGE-L
// ---------------------------------------------------------------------------

struct NgramMetrics {
    double bleu4 = 0.0;
    double rouge_l = 0.0;
};

// BLEU-4: uniform weights over 1..4-grams, reference-clipped counts, brevity
// penalty against the closest reference length, no smoothing. ROUGE-L: LCS
// F-measure with beta^2 = 1.44 (recall-favoring, per convention); multiple
// references reduce by max.
inline NgramMetrics ngram_metrics(const TextPair& t) {
    if (t.candidate.empty()) throw make_error("EmptyCandidate", "BLEU/ROUGE");
    if (t.references.empty()) throw make_error("EmptyReferences", "BLEU/ROUGE");
    NgramMetrics out;

    // BLEU-4
    double log_sum = 0.0;
    bool zero = false;
    for (int n = 1; n <= 4; ++n) {
        auto cand = detail::ngram_counts(t.candidate, n);
        detail::NgramCounts max_ref;
        for (const auto& ref : t.references)
            for (const auto& [gram, c] : detail::ngram_counts(ref, n))
                max_ref[gram] = std::max(max_ref[gram], c);
        long long clipped = 0, total = 0;
        for (const auto& [gram, c] : cand) {
            total += c;
            auto it = max_ref.find(gram);
            if (it != max_ref.end()) clipped += std::min(c, it->second);
        }
        if (total == 0 || clipped == 0) {
            zero = true;
            break;
        }
        log_sum += 0.25 * std::log(static_cast<double>(clipped) /
                                   static_cast<double>(total));
    }
    if (!zero) {
        const long long c = static_cast<long long>(t.candidate.size());
        long long r = static_cast<long long>(t.references[0].size());
        for (const auto& ref : t.references) {
            long long len = static_cast<long long>(ref.size());
            if (std::llabs(len - c) < std::llabs(r - c) ||
                (std::llabs(len - c) == std::llabs(r - c) && len < r))
                r = len;
        }
        double bp = c >= r ? 1.0
                           : std::exp(1.0 - static_cast<double>(r) /
                                                static_cast<double>(c));
        out.bleu4 = bp * std::exp(log_sum);
    }

    // ROUGE-L
    constexpr double kBetaSq = 1.2 * 1.2;
    double best = 0.0;
    for (const auto& ref : t.references) {
        if (ref.empty()) continue;
        double lcs = static_cast<double>(detail::lcs_length(t.candidate, ref));
        if (lcs == 0.0) continue;
        double p = lcs / static_cast<double>(t.candidate.size());
        double r = lcs / static_cast<double>(ref.size());
        best = std::max(best, (1.0 + kBetaSq) * r * p / (r + kBetaSq * p));
    }
    out.rouge_l = best;
    return out;
}

// ---------------------------------------------------------------------------
// CIDEr
// ---------------------------------------------------------------------------

struct CiderResult {
    std::vector<double> per_sample;
    double mean = 0.0;
};

// Corpus-level CIDEr (D variant): 1..4-gram TF-IDF cosine with candidate
// counts clipped to the reference, a gaussian length penalty (sigma = 6), and
// the x10 convention. Document frequencies come from the provided references.
inline CiderResult cider(const std::vector<TextPair>& corpus) {
    if (corpus.empty()) throw make_error("EmptyCorpus", "CIDEr");
    constexpr int kMaxN = 4;
    constexpr double kSigma = 6.0;

    // Document frequency: number of corpus items whose reference set contains
    // the n-gram at least once.
    std::map<std::vector<std::string>, double> df;
    for (const auto& t : corpus) {
        std::map<std::vector<std::string>, bool> seen;
        for (const auto& ref : t.references)
            for (int n = 1; n <= kMaxN; ++n)
                for (const auto& [gram, c] : detail::ngram_counts(ref, n))
                    seen[gram] = true;
        for (const auto& [gram, _] : seen) df[gram] += 1.0;
    }
    const double log_corpus = std::log(static_cast<double>(corpus.size()));

    struct Vec {
        std::array<std::map<std::vector<std::string>, double>, kMaxN> tfidf;
        std::array<double, kMaxN> norm{};
        double length = 0.0;
    };
    auto vectorize = [&](const std::vector<std::string>& tokens) {
        Vec v;
        v.length = static_cast<double>(tokens.size());
        for (int n = 1; n <= kMaxN; ++n) {
            for (const auto& [gram, c] : detail::ngram_counts(tokens, n)) {
                double idf = log_corpus - std::log(std::max(1.0, df[gram]));
                v.tfidf[n - 1][gram] = static_cast<double>(c) * idf;
            }
            double s = 0.0;
            for (const auto& [_, w] : v.tfidf[n - 1]) s += w * w;
            v.norm[n - 1] = std::sqrt(s);
        }
        return v;
    };

    CiderResult result;
    for (const auto& t : corpus) {
        if (t.references.empty()) throw make_error("EmptyReferences", "CIDEr");
        Vec cand = vectorize(t.candidate);
        double score = 0.0;
        for (const auto& ref : t.references) {
            Vec rv = vectorize(ref);
            double delta = cand.length - rv.length;
            double penalty = std::exp(-delta * delta / (2.0 * kSigma * kSigma));
            double sim_sum = 0.0;
            for (int n = 0; n < kMaxN; ++n) {
                if (cand.norm[n] == 0.0 || rv.norm[n] == 0.0) continue;
                double dot = 0.0;
                for (const auto& [gram, w] : cand.tfidf[n]) {
                    auto it = rv.tfidf[n].find(gram);
                    if (it != rv.tfidf[n].end())
                        dot += std::min(w, it->second) * it->second;
                }
                sim_sum += dot / (cand.norm[n] * rv.norm[n]);
            }
            score += penalty * sim_sum / static_cast<double>(kMaxN);
        }
        score *= 10.0 / static_cast<double>(t.references.size());
        result.per_sample.push_back(score);
        result.mean += score;
    }
    result.mean /= static_cast<double>(result.per_sample.size());
    return result;
}

// ---------------------------------------------------------------------------
// meteor_lite
// ---------------------------------------------------------------------------

namespace detail {

// Minimal chunk count over alignments that realize the maximum exact-unigram
// matching. Exact DFS with memoization for short sentences; falls back to a
// greedy longest-common-run decomposition beyond kExactLimit tokens.
constexpr size_t kExactChunkLimit = 24;

struct ChunkSearch {
    const std::vector<std::string>& c;
    const std::vector<std::string>& r;
    std::map<std::string, int> need;  // remaining matches per word
    std::vector<bool> used_c, used_r;
    std::map<std::string, int> avail_c;  // unused occurrences per word
    int best = 1 << 20;

    ChunkSearch(const std::vector<std::string>& cand,
                const std::vector<std::string>& ref)
        : c(cand), r(ref), used_c(cand.size(), false), used_r(ref.size(), false) {
        std::map<std::string, int> cc, rc;
        for (const auto& w : cand) ++cc[w];
        for (const auto& w : ref) ++rc[w];
        for (const auto& [w, n] : cc)
            if (rc.count(w)) need[w] = std::min(n, rc.at(w));
        avail_c = cc;
    }

    bool done() const {
        for (const auto& [_, n] : need)
            if (n > 0) return false;
        return true;
    }

    void dfs(int chunks) {
        if (chunks >= best) return;
        // First candidate position that still must be matched.
        size_t start = c.size();
        for (size_t i = 0; i < c.size(); ++i) {
            if (used_c[i]) continue;
            auto it = need.find(c[i]);
            if (it == need.end() || it->second == 0) continue;
            // This occurrence may be skipped only if enough later ones remain.
            if (avail_c[c[i]] > it->second) {
                // Try skipping it (counts as permanently unmatched).
                used_c[i] = true;
                --avail_c[c[i]];
                dfs(chunks);
                ++avail_c[c[i]];
                used_c[i] = false;
            }
            start = i;
            break;
        }
        if (start == c.size()) {
            best = std::min(best, chunks);
            return;
        }
        for (size_t j = 0; j < r.size(); ++j) {
            if (used_r[j] || r[j] != c[start]) continue;
            // Extend a chunk from (start, j) over every possible length.
            size_t len = 0;
            std::vector<std::pair<size_t, size_t>> taken;
            while (start + len < c.size() && j + len < r.size() &&
                   !used_c[start + len] && !used_r[j + len] &&
                   c[start + len] == r[j + len]) {
                const std::string& w = c[start + len];
                auto it = need.find(w);
                if (it == need.end() || it->second == 0) break;
                used_c[start + len] = true;
                used_r[j + len] = true;
                --it->second;
                --avail_c[w];
                taken.push_back({start + len, j + len});
                ++len;
                dfs(chunks + 1);
            }
            for (auto rit = taken.rbegin(); rit != taken.rend(); ++rit) {
                used_c[rit->first] = false;
                used_r[rit->second] = false;
                ++need[c[rit->first]];
                ++avail_c[c[rit->first]];
            }
        }
    }
};

inline int min_chunks_greedy(std::vector<std::string> c,
                             std::vector<std::string> r) {
    // Repeatedly remove the longest common run; each removal is one chunk.
    int chunks = 0;
    const std::string kGap1 = "\x01", kGap2 = "\x02";
    while (true) {
        size_t best_len = 0, best_i = 0, best_j = 0;
        for (size_t i = 0; i < c.size(); ++i)
            for (size_t j = 0; j < r.size(); ++j) {
                size_t len = 0;
                while (i + len < c.size() && j + len < r.size() &&
                       c[i + len] == r[j + len] && c[i + len] != kGap1 &&
                       c[i + len] != kGap2)
                    ++len;
                if (len > best_len) {
                    best_len = len;
                    best_i = i;
                    best_j = j;
                }
            }
        if (best_len == 0) break;
        for (size_t k = 0; k < best_len; ++k) {
            c[best_i + k] = kGap1;
            r[best_j + k] = kGap2;
        }
        ++chunks;
    }
    return chunks;
}

inline int min_chunks(const std::vector<std::string>& c,
                      const std::vector<std::string>& r) {
    if (c.size() <= kExactChunkLimit && r.size() <= kExactChunkLimit) {
        ChunkSearch search(c, r);
        if (search.done()) return 0;
        search.dfs(0);
        return search.best;
    }
    return min_chunks_greedy(c, r);
}

}  // namespace detail

// Simplified METEOR: exact unigram matches only (no synonym or paraphrase
// tables), alpha = 0.9, fragmentation penalty gamma = 0.5, beta = 3. Reported
// as meteor_lite everywhere; not comparable with third-party METEOR scores.
inline double meteor_lite(const TextPair& t) {
    if (t.candidate.empty()) throw make_error("EmptyCandidate", "meteor_lite");
    if (t.references.empty()) throw make_error("EmptyReferences", "meteor_lite");
    constexpr double kAlpha = 0.9, kGamma = 0.5, kBeta = 3.0;
    double best = 0.0;
    for (const auto& ref : t.references) {
        if (ref.empty()) continue;
        std::map<std::string, long long> cc, rc;
        for (const auto& w : t.candidate) ++cc[w];
        for (const auto& w : ref) ++rc[w];
        long long m = 0;
        for (const auto& [w, n] : cc)
            if (rc.count(w)) m += std::min(n, rc.at(w));
        if (m == 0) continue;
        double p = static_cast<double>(m) / static_cast<double>(t.candidate.size());
        double r = static_cast<double>(m) / static_cast<double>(ref.size());
        double fmean = p * r / (kAlpha * p + (1.0 - kAlpha) * r);
        double chunks = static_cast<double>(detail::min_chunks(t.candidate, ref));
        double penalty =
            kGamma * std::pow(chunks / static_cast<double>(m), kBeta);
        best = std::max(best, fmean * (1.0 - penalty));
    }
    return best;
}

}  // namespace fifa
