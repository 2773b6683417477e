#ifndef APIUSAGE_NGRAM_HPP
#define APIUSAGE_NGRAM_HPP

// Count-based n-gram baseline with additive smoothing:
//   P(y | ctx) = (count(ctx, y) + delta) / (count(ctx) + delta * M)
// Contexts are the previous n-1 calls, left-padded with a start marker.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apiusage/error.hpp"
#include "apiusage/hmm.hpp"

namespace apiusage {

using NgramContext = std::vector<std::int64_t>;

inline constexpr std::int64_t kStartSymbol = -1;

struct NgramModel {
    std::size_t n = 3;
    double delta = 0.1;
    std::vector<std::string> types;
    std::vector<std::string> vocab;
    std::map<NgramContext, std::map<std::size_t, std::uint64_t>> counts;

    std::size_t vocab_size() const { return vocab.size(); }

    std::optional<std::size_t> symbol(const std::string& method) const {
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            if (vocab[i] == method) return i;
        }
        return std::nullopt;
    }

    Symbols encode(const std::vector<std::string>& calls) const {
        Symbols out;
        for (const auto& c : calls) {
            auto s = symbol(c);
            if (!s) throw OutOfVocabularyError(c);
            out.push_back(*s);
        }
        return out;
    }

    friend bool operator==(const NgramModel&, const NgramModel&) = default;
};

/// The n-1 symbols before position `pos`, padded with the start marker.
inline NgramContext context_at(std::span<const std::size_t> seq, std::size_t pos, std::size_t n) {
    NgramContext ctx(n - 1, kStartSymbol);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const std::size_t back = n - 1 - k;  // distance from pos
        if (pos >= back) ctx[k] = static_cast<std::int64_t>(seq[pos - back]);
    }
    return ctx;
}

inline NgramModel train_ngram(const TrainSet& data, std::size_t n = 3, double delta = 0.1) {
    if (data.items.empty()) throw TrainingError("n-gram training needs at least one sequence");
    if (n < 1) throw TrainingError("n-gram order must be at least 1");
    if (!(delta > 0.0)) throw TrainingError("smoothing constant must be positive");
    NgramModel m;
    m.n = n;
    m.delta = delta;
    m.vocab = data.vocab;
    for (const auto& item : data.items) {
        for (std::size_t t = 0; t < item.seq.size(); ++t) {
            if (item.seq[t] >= m.vocab.size()) throw TrainingError("symbol outside vocabulary");
            m.counts[context_at(item.seq, t, n)][item.seq[t]] += item.count;
        }
    }
    return m;
}

inline NgramModel train_ngram(const CountedSequences& data, std::size_t n = 3, double delta = 0.1) {
    if (data.empty()) throw TrainingError("n-gram training needs at least one sequence");
    return train_ngram(make_trainset(data), n, delta);
}

/// Smoothed conditional probability. Unseen contexts give 1/M.
inline double ngram_prob(const NgramModel& m, const NgramContext& context, std::size_t symbol) {
    if (symbol >= m.vocab_size()) throw OutOfVocabularyError("#" + std::to_string(symbol));
    if (context.size() != m.n - 1) throw InputError("context length must be n-1");
    const double big_m = static_cast<double>(m.vocab_size());
    double seen = 0.0;
    double total = 0.0;
    auto it = m.counts.find(context);
    if (it != m.counts.end()) {
        for (const auto& [s, c] : it->second) {
            total += static_cast<double>(c);
            if (s == symbol) seen = static_cast<double>(c);
        }
    }
    return (seen + m.delta) / (total + m.delta * big_m);
}

/// String form; shorter contexts are left-padded with the start marker and
/// longer ones truncated to their last n-1 calls.
inline double ngram_prob(const NgramModel& m, const std::vector<std::string>& context,
                         const std::string& symbol) {
    const Symbols ctx = m.encode(context);
    NgramContext padded(m.n - 1, kStartSymbol);
    for (std::size_t k = 0; k < padded.size() && k < ctx.size(); ++k) {
        padded[padded.size() - 1 - k] = static_cast<std::int64_t>(ctx[ctx.size() - 1 - k]);
    }
    const auto s = m.symbol(symbol);
    if (!s) throw OutOfVocabularyError(symbol);
    return ngram_prob(m, padded, *s);
}

/// Chain-rule log probability of a whole sequence.
inline double ngram_seq_prob(const NgramModel& m, std::span<const std::size_t> seq) {
    double lp = 0.0;
    for (std::size_t t = 0; t < seq.size(); ++t) {
        lp += std::log(ngram_prob(m, context_at(seq, t, m.n), seq[t]));
    }
    return lp;
}

inline double ngram_seq_prob(const NgramModel& m, const std::vector<std::string>& calls) {
    const Symbols seq = m.encode(calls);
    return ngram_seq_prob(m, seq);
}

}  // namespace apiusage

#endif  // APIUSAGE_NGRAM_HPP
