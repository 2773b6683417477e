#ifndef APIUSAGE_RECOMMEND_HPP
#define APIUSAGE_RECOMMEND_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "apiusage/error.hpp"
#include "apiusage/hmm.hpp"
#include "apiusage/ngram.hpp"

namespace apiusage {

struct ScoredMethod {
    std::string method;
    double score = 0.0;  // log-probability of the completed sequence
    friend bool operator==(const ScoredMethod&, const ScoredMethod&) = default;
};

/// Every vocabulary entry, best first; equal scores in lexicographic order.
struct Recommendation {
    std::vector<ScoredMethod> ranked;
    std::vector<std::string> query_types;
    std::size_t hole_position = 1;  // 1-based position in the completed sequence
};

inline Recommendation make_recommendation(const std::vector<std::string>& vocab,
                                          const std::vector<double>& scores,
                                          std::vector<std::string> types, std::size_t hole) {
    Recommendation rec;
    rec.query_types = std::move(types);
    rec.hole_position = hole;
    rec.ranked.reserve(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i) rec.ranked.push_back({vocab[i], scores[i]});
    std::sort(rec.ranked.begin(), rec.ranked.end(), [](const ScoredMethod& a, const ScoredMethod& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.method < b.method;
    });
    return rec;
}

namespace detail {

inline void check_hole(std::size_t observed, std::size_t hole) {
    if (hole < 1 || hole > observed + 1) {
        throw InputError("hole position " + std::to_string(hole) + " outside 1.." +
                         std::to_string(observed + 1));
    }
}

}  // namespace detail

/// Scores each vocabulary entry v by log P(y_1..y_{T-1}, v, y_T..y_N) where
/// `observed` is the sequence with the hole removed and T the 1-based hole
/// position (T = N+1 predicts the next call). The prefix is run forward and
/// the suffix backward once; each candidate then costs O(K).
inline Recommendation next_api_call(const Hapi& m, std::span<const std::size_t> observed,
                                    std::size_t hole) {
    if (m.vocab_size() == 0) throw InputError("model has an empty vocabulary");
    detail::check_hole(observed.size(), hole);
    detail::check_symbols(m, observed);
    const std::size_t k = m.num_states();
    const auto prefix = observed.first(hole - 1);
    const auto suffix = observed.subspan(hole - 1);

    // State distribution at the hole given the prefix, and log P(prefix).
    std::vector<double> prior(k);
    double log_prefix = 0.0;
    if (prefix.empty()) {
        prior = m.pi;
    } else {
        const FbTables fb = forward(m, prefix, prefix.size());
        log_prefix = fb.loglik;
        for (std::size_t i = 0; i < k; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += fb.alpha(prefix.size() - 1, j) * m.trans(j, i);
            prior[i] = acc;
        }
    }

    // P(suffix | state at the hole), up to exp(log_suffix).
    std::vector<double> after(k, 1.0);
    double log_suffix = 0.0;
    if (!suffix.empty()) {
        const BackwardTable bt = backward(m, suffix, 0);
        log_suffix = bt.log_norm[0];
        for (std::size_t i = 0; i < k; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                acc += m.trans(i, j) * m.emit(j, suffix[0]) * bt.beta(0, j);
            }
            after[i] = acc;
        }
    }

    std::vector<double> scores(m.vocab_size());
    for (std::size_t v = 0; v < m.vocab_size(); ++v) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += prior[i] * m.emit(i, v) * after[i];
        scores[v] = log_prefix + log_suffix + std::log(s);
    }
    return make_recommendation(m.vocab, scores, m.types, hole);
}

inline Recommendation next_api_call(const Hapi& m, const std::vector<std::string>& observed,
                                    std::size_t hole) {
    const Symbols seq = m.encode(observed);
    return next_api_call(m, seq, hole);
}

/// Same contract as next_api_call, scored with the n-gram chain rule.
inline Recommendation next_api_call_ngram(const NgramModel& m, std::span<const std::size_t> observed,
                                          std::size_t hole) {
    if (m.vocab_size() == 0) throw InputError("model has an empty vocabulary");
    detail::check_hole(observed.size(), hole);
    for (std::size_t s : observed) {
        if (s >= m.vocab_size()) throw OutOfVocabularyError("#" + std::to_string(s));
    }
    Symbols filled(observed.begin(), observed.end());
    filled.insert(filled.begin() + static_cast<std::ptrdiff_t>(hole - 1), 0);
    std::vector<double> scores(m.vocab_size());
    for (std::size_t v = 0; v < m.vocab_size(); ++v) {
        filled[hole - 1] = v;
        scores[v] = ngram_seq_prob(m, filled);
    }
    return make_recommendation(m.vocab, scores, m.types, hole);
}

inline Recommendation next_api_call_ngram(const NgramModel& m,
                                          const std::vector<std::string>& observed,
                                          std::size_t hole) {
    const Symbols seq = m.encode(observed);
    return next_api_call_ngram(m, seq, hole);
}

inline std::vector<std::string> top_k(const Recommendation& rec, std::size_t k) {
    if (k == 0) throw InputError("k must be at least 1");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < rec.ranked.size() && i < k; ++i) out.push_back(rec.ranked[i].method);
    return out;
}

// Uniform entry points used by the evaluation code.

inline Recommendation recommend(const Hapi& m, std::span<const std::size_t> observed,
                                std::size_t hole) {
    return next_api_call(m, observed, hole);
}

inline Recommendation recommend(const NgramModel& m, std::span<const std::size_t> observed,
                                std::size_t hole) {
    return next_api_call_ngram(m, observed, hole);
}

}  // namespace apiusage

#endif  // APIUSAGE_RECOMMEND_HPP
