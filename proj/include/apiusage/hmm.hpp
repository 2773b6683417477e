#ifndef APIUSAGE_HMM_HPP
#define APIUSAGE_HMM_HPP

// Hidden Markov usage models over an API-method vocabulary.
//
// A model has K hidden states, initial distribution pi, row-stochastic
// transitions trans (K x K) and emissions emit (K x M). Forward and backward
// passes are scaled per step: alpha rows sum to one and the log-likelihood is
// the sum of the log normalizers. Training is Baum-Welch over a counted
// training set, each distinct sequence weighted by how often it occurs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "apiusage/error.hpp"
#include "apiusage/random.hpp"
#include "apiusage/sequence.hpp"

namespace apiusage {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

using Symbols = std::vector<std::size_t>;

struct TrainMeta {
    std::uint64_t seed = 0;
    std::size_t iterations = 0;
    double loglik = 0.0;
    friend bool operator==(const TrainMeta&, const TrainMeta&) = default;
};

struct Hapi {
    std::vector<std::string> types;  // object key this model covers
    std::vector<std::string> vocab;
    std::vector<double> pi;
    Matrix trans;
    Matrix emit;
    TrainMeta meta;

    std::size_t num_states() const { return pi.size(); }
    std::size_t vocab_size() const { return vocab.size(); }

    std::optional<std::size_t> symbol(const std::string& method) const {
        auto it = std::find(vocab.begin(), vocab.end(), method);
        if (it == vocab.end()) return std::nullopt;
        return static_cast<std::size_t>(it - vocab.begin());
    }

    Symbols encode(const std::vector<std::string>& calls) const {
        Symbols out;
        out.reserve(calls.size());
        for (const auto& c : calls) {
            auto s = symbol(c);
            if (!s) throw OutOfVocabularyError(c);
            out.push_back(*s);
        }
        return out;
    }

    friend bool operator==(const Hapi&, const Hapi&) = default;
};

/// Throws InputError unless the stochastic invariants hold within `tol`.
inline void validate(const Hapi& m, double tol = 1e-9) {
    const std::size_t k = m.num_states();
    const std::size_t v = m.vocab_size();
    if (k == 0) throw InputError("model has no hidden states");
    if (v == 0) throw InputError("model has an empty vocabulary");
    if (m.trans.rows() != k || m.trans.cols() != k) throw InputError("transition matrix is not K x K");
    if (m.emit.rows() != k || m.emit.cols() != v) throw InputError("emission matrix is not K x M");
    std::vector<std::string> sorted = m.vocab;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw InputError("vocabulary has duplicates");
    }
    auto check = [tol](std::span<const double> row, const char* what) {
        double sum = 0.0;
        for (double x : row) {
            if (!(x >= 0.0)) throw InputError(std::string(what) + " has a negative or NaN entry");
            sum += x;
        }
        if (std::abs(sum - 1.0) > tol) throw InputError(std::string(what) + " does not sum to 1");
    };
    check(m.pi, "initial distribution");
    for (std::size_t i = 0; i < k; ++i) {
        check(m.trans.row(i), "transition row");
        check(m.emit.row(i), "emission row");
    }
}

// ---------------------------------------------------------------------------
// Forward / backward

struct FbTables {
    Matrix alpha;  // T x K, each row sums to one (zero rows once the sequence is impossible)
    Matrix beta;   // T x K, scaled with the forward normalizers
    std::vector<double> scale;
    double loglik = 0.0;
};

namespace detail {

inline void check_symbols(const Hapi& m, std::span<const std::size_t> seq) {
    for (std::size_t s : seq) {
        if (s >= m.vocab_size()) throw OutOfVocabularyError("#" + std::to_string(s));
    }
}

/// Normalizes `row` to sum one; returns the sum (zero leaves the row as is).
inline double normalize(std::span<double> row) {
    double sum = 0.0;
    for (double x : row) sum += x;
    if (sum > 0.0) {
        for (double& x : row) x /= sum;
    }
    return sum;
}

}  // namespace detail

/// Scaled forward pass over the first `prefix` symbols. The unscaled
/// probability of y_1..y_P is the product of the returned scale factors.
inline FbTables forward(const Hapi& m, std::span<const std::size_t> seq, std::size_t prefix) {
    if (prefix > seq.size()) throw InputError("forward prefix longer than the sequence");
    detail::check_symbols(m, seq.first(prefix));
    const std::size_t k = m.num_states();
    FbTables fb;
    fb.alpha = Matrix(prefix, k);
    fb.scale.assign(prefix, 0.0);
    fb.loglik = 0.0;
    for (std::size_t t = 0; t < prefix; ++t) {
        auto row = fb.alpha.row(t);
        for (std::size_t i = 0; i < k; ++i) {
            double in = 0.0;
            if (t == 0) {
                in = m.pi[i];
            } else {
                for (std::size_t j = 0; j < k; ++j) in += fb.alpha(t - 1, j) * m.trans(j, i);
            }
            row[i] = in * m.emit(i, seq[t]);
        }
        fb.scale[t] = detail::normalize(row);
        fb.loglik += std::log(fb.scale[t]);
    }
    return fb;
}

/// Backward values for positions first..T-1 (0-based). The last row is all
/// ones and every earlier row is normalized to sum one; the unscaled value is
/// beta(r, i) * exp(log_norm[r]).
struct BackwardTable {
    std::size_t first = 0;
    Matrix beta;
    std::vector<double> log_norm;
};

inline BackwardTable backward(const Hapi& m, std::span<const std::size_t> seq, std::size_t first) {
    if (first >= seq.size()) throw InputError("backward start past the end of the sequence");
    detail::check_symbols(m, seq.subspan(first));
    const std::size_t k = m.num_states();
    const std::size_t rows = seq.size() - first;
    BackwardTable bt;
    bt.first = first;
    bt.beta = Matrix(rows, k);
    bt.log_norm.assign(rows, 0.0);
    for (std::size_t i = 0; i < k; ++i) bt.beta(rows - 1, i) = 1.0;
    for (std::size_t r = rows - 1; r-- > 0;) {
        const std::size_t next_symbol = seq[first + r + 1];
        auto row = bt.beta.row(r);
        for (std::size_t i = 0; i < k; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                acc += m.trans(i, j) * m.emit(j, next_symbol) * bt.beta(r + 1, j);
            }
            row[i] = acc;
        }
        const double norm = detail::normalize(row);
        bt.log_norm[r] = bt.log_norm[r + 1] + std::log(norm);
    }
    return bt;
}

/// Joint pass: beta is scaled with the forward normalizers so that
/// sum_i alpha(t,i) * beta(t,i) == 1 for every t.
inline FbTables forward_backward(const Hapi& m, std::span<const std::size_t> seq) {
    FbTables fb = forward(m, seq, seq.size());
    const std::size_t k = m.num_states();
    const std::size_t n = seq.size();
    fb.beta = Matrix(n, k);
    if (n == 0) return fb;
    for (std::size_t i = 0; i < k; ++i) fb.beta(n - 1, i) = 1.0;
    for (std::size_t t = n - 1; t-- > 0;) {
        const double c = fb.scale[t + 1];
        for (std::size_t i = 0; i < k; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                acc += m.trans(i, j) * m.emit(j, seq[t + 1]) * fb.beta(t + 1, j);
            }
            fb.beta(t, i) = c > 0.0 ? acc / c : 0.0;
        }
    }
    return fb;
}

/// log P(seq | model). Symbols outside the vocabulary raise OutOfVocabularyError.
inline double sequence_loglik(const Hapi& m, std::span<const std::size_t> seq) {
    if (seq.empty()) throw InputError("sequence_loglik needs a non-empty sequence");
    return forward(m, seq, seq.size()).loglik;
}

inline double sequence_loglik(const Hapi& m, const std::vector<std::string>& calls) {
    const Symbols seq = m.encode(calls);
    return sequence_loglik(m, seq);
}

struct PosteriorStats {
    Matrix gamma;                // T x K
    std::vector<Matrix> xi;      // T-1 matrices of K x K
};

inline PosteriorStats posteriors(const Hapi& m, std::span<const std::size_t> seq,
                                 const FbTables& fb) {
    const std::size_t k = m.num_states();
    const std::size_t n = seq.size();
    PosteriorStats ps;
    ps.gamma = Matrix(n, k);
    for (std::size_t t = 0; t < n; ++t) {
        auto row = ps.gamma.row(t);
        for (std::size_t i = 0; i < k; ++i) row[i] = fb.alpha(t, i) * fb.beta(t, i);
        detail::normalize(row);
    }
    ps.xi.reserve(n > 0 ? n - 1 : 0);
    for (std::size_t t = 0; t + 1 < n; ++t) {
        Matrix x(k, k);
        const double c = fb.scale[t + 1];
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                x(i, j) = c > 0.0 ? fb.alpha(t, i) * m.trans(i, j) * m.emit(j, seq[t + 1]) *
                                        fb.beta(t + 1, j) / c
                                  : 0.0;
            }
        }
        ps.xi.push_back(std::move(x));
    }
    return ps;
}

// ---------------------------------------------------------------------------
// Training data

struct TrainItem {
    Symbols seq;
    std::uint64_t count = 1;
    friend bool operator==(const TrainItem&, const TrainItem&) = default;
};

struct TrainSet {
    std::vector<std::string> vocab;
    std::vector<TrainItem> items;

    std::uint64_t total() const {
        std::uint64_t d = 0;
        for (const auto& it : items) d += it.count;
        return d;
    }
    bool empty() const { return items.empty(); }
};

using CountedSequences = std::vector<std::pair<ApiSequence, std::uint64_t>>;

/// Sorted distinct calls of the given sequences.
inline std::vector<std::string> vocabulary_of(const CountedSequences& data) {
    std::set<std::string> v;
    for (const auto& [seq, c] : data) v.insert(seq.calls.begin(), seq.calls.end());
    return {v.begin(), v.end()};
}

/// Encodes against a fixed vocabulary. Sequences with unknown calls are left
/// out and their occurrences added to `skipped` when given.
inline TrainSet encode_trainset(const CountedSequences& data, const std::vector<std::string>& vocab,
                                std::uint64_t* skipped = nullptr) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);
    TrainSet ts;
    ts.vocab = vocab;
    for (const auto& [seq, c] : data) {
        Symbols s;
        bool ok = true;
        for (const auto& call : seq.calls) {
            auto it = index.find(call);
            if (it == index.end()) {
                ok = false;
                break;
            }
            s.push_back(it->second);
        }
        if (ok) {
            ts.items.push_back({std::move(s), c});
        } else if (skipped) {
            *skipped += c;
        }
    }
    return ts;
}

inline TrainSet make_trainset(const CountedSequences& data) {
    return encode_trainset(data, vocabulary_of(data));
}

/// Sum over items of count * log P(seq).
inline double total_loglik(const Hapi& m, const TrainSet& data) {
    double total = 0.0;
    for (const auto& it : data.items) {
        total += static_cast<double>(it.count) * sequence_loglik(m, it.seq);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
    double tol = 1e-6;
    std::size_t max_iter = 200;
    double emission_floor = 1e-12;
    // Independent random starts; each runs `burn_in` updates and only the
    // most likely one is carried on to convergence.
    std::size_t restarts = 5;
    std::size_t burn_in = 10;
};

struct TrainResult {
    Hapi model;
    std::vector<double> loglik_trace;  // weighted log-likelihood of every iterate, initial included
    std::size_t iterations = 0;
    bool converged = false;
};

/// Uniform random positive entries, row-normalized.
inline Hapi random_hapi(std::size_t k, std::vector<std::string> vocab, std::uint64_t seed) {
    if (k == 0) throw TrainingError("number of hidden states must be at least 1");
    if (vocab.empty()) throw TrainingError("empty vocabulary");
    Rng rng(seed);
    Hapi m;
    m.vocab = std::move(vocab);
    const std::size_t v = m.vocab.size();
    auto fill = [&rng](std::span<double> row) {
        for (double& x : row) x = 1e-3 + uniform01(rng);
        detail::normalize(row);
    };
    m.pi.assign(k, 0.0);
    fill(m.pi);
    m.trans = Matrix(k, k);
    for (std::size_t i = 0; i < k; ++i) fill(m.trans.row(i));
    m.emit = Matrix(k, v);
    for (std::size_t i = 0; i < k; ++i) fill(m.emit.row(i));
    m.meta.seed = seed;
    return m;
}

namespace detail {

struct Accumulators {
    std::vector<double> pi;
    Matrix trans_num;
    std::vector<double> trans_den;
    Matrix emit_num;
    std::vector<double> emit_den;
    double loglik = 0.0;

    Accumulators(std::size_t k, std::size_t v)
        : pi(k, 0.0), trans_num(k, k), trans_den(k, 0.0), emit_num(k, v), emit_den(k, 0.0) {}
};

inline Accumulators expectation(const Hapi& m, const TrainSet& data) {
    const std::size_t k = m.num_states();
    Accumulators acc(k, m.vocab_size());
    for (const auto& item : data.items) {
        const double c = static_cast<double>(item.count);
        const FbTables fb = forward_backward(m, item.seq);
        acc.loglik += c * fb.loglik;
        const PosteriorStats ps = posteriors(m, item.seq, fb);
        const std::size_t n = item.seq.size();
        for (std::size_t i = 0; i < k; ++i) acc.pi[i] += c * ps.gamma(0, i);
        for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t i = 0; i < k; ++i) {
                const double g = c * ps.gamma(t, i);
                acc.emit_num(i, item.seq[t]) += g;
                acc.emit_den[i] += g;
                if (t + 1 < n) acc.trans_den[i] += g;
            }
        }
        for (std::size_t t = 0; t + 1 < n; ++t) {
            for (std::size_t i = 0; i < k; ++i) {
                for (std::size_t j = 0; j < k; ++j) acc.trans_num(i, j) += c * ps.xi[t](i, j);
            }
        }
    }
    return acc;
}

inline void apply_floor(std::span<double> row, double floor) {
    bool clamped = false;
    for (double& x : row) {
        if (x < floor) {
            x = floor;
            clamped = true;
        }
    }
    if (clamped) normalize(row);
}

inline Hapi maximization(const Hapi& prev, const Accumulators& acc, double total,
                         double emission_floor) {
    const std::size_t k = prev.num_states();
    const std::size_t v = prev.vocab_size();
    Hapi next = prev;
    for (std::size_t i = 0; i < k; ++i) next.pi[i] = acc.pi[i] / total;
    for (std::size_t i = 0; i < k; ++i) {
        if (acc.trans_den[i] > 0.0) {
            for (std::size_t j = 0; j < k; ++j) next.trans(i, j) = acc.trans_num(i, j) / acc.trans_den[i];
        }
        if (acc.emit_den[i] > 0.0) {
            for (std::size_t s = 0; s < v; ++s) next.emit(i, s) = acc.emit_num(i, s) / acc.emit_den[i];
        }
        apply_floor(next.emit.row(i), emission_floor);
    }
    return next;
}

inline void check_trainset(const TrainSet& data) {
    if (data.items.empty()) throw TrainingError("empty training set");
    if (data.vocab.empty()) throw TrainingError("empty vocabulary");
    bool has_transition = false;
    for (const auto& it : data.items) {
        if (it.count == 0) throw TrainingError("training counts must be positive");
        if (it.seq.empty()) throw TrainingError("empty training sequence");
        for (std::size_t s : it.seq) {
            if (s >= data.vocab.size()) throw TrainingError("training symbol outside vocabulary");
        }
        if (it.seq.size() >= 2) has_transition = true;
    }
    if (!has_transition) {
        throw TrainingError("all training sequences have length 1; transitions cannot be estimated");
    }
}

}  // namespace detail

/// Baum-Welch from a given starting model. Stops when the relative
/// improvement of the weighted log-likelihood drops below `tol` or after
/// `max_iter` updates.
inline TrainResult train_from(const TrainSet& data, Hapi init, const TrainOptions& opts = {}) {
    detail::check_trainset(data);
    if (init.vocab != data.vocab) throw TrainingError("model and training set vocabularies differ");
    const double total = static_cast<double>(data.total());

    TrainResult res;
    res.model = std::move(init);
    detail::Accumulators acc = detail::expectation(res.model, data);
    res.loglik_trace.push_back(acc.loglik);
    double prev = acc.loglik;
    for (std::size_t iter = 1; iter <= opts.max_iter; ++iter) {
        res.model = detail::maximization(res.model, acc, total, opts.emission_floor);
        acc = detail::expectation(res.model, data);
        res.loglik_trace.push_back(acc.loglik);
        res.iterations = iter;
        const double gain = acc.loglik - prev;
        const double rel = prev != 0.0 ? gain / std::abs(prev) : gain;
        if (rel < opts.tol) {
            res.converged = true;
            break;
        }
        prev = acc.loglik;
    }
    res.model.meta.iterations = res.iterations;
    res.model.meta.loglik = res.loglik_trace.back();
    return res;
}

/// Seed of the r-th random start; the first start uses the base seed itself.
inline std::uint64_t restart_seed(std::uint64_t seed, std::size_t r) {
    return r == 0 ? seed : derive_seed(seed, "restart/" + std::to_string(r));
}

inline TrainResult train_traced(const TrainSet& data, std::size_t k, std::uint64_t seed,
                                const TrainOptions& opts = {}) {
    detail::check_trainset(data);
    const std::size_t starts = std::max<std::size_t>(opts.restarts, 1);
    if (starts == 1 || k == 1) return train_from(data, random_hapi(k, data.vocab, seed), opts);

    TrainOptions short_run = opts;
    short_run.max_iter = std::min(opts.burn_in, opts.max_iter);
    std::optional<TrainResult> best;
    for (std::size_t r = 0; r < starts; ++r) {
        TrainResult run = train_from(data, random_hapi(k, data.vocab, restart_seed(seed, r)), short_run);
        if (!best || run.loglik_trace.back() > best->loglik_trace.back()) best = std::move(run);
    }
    TrainResult res = std::move(*best);
    if (!res.converged && res.iterations < opts.max_iter) {
        TrainOptions rest = opts;
        rest.max_iter = opts.max_iter - res.iterations;
        TrainResult more = train_from(data, std::move(res.model), rest);
        res.loglik_trace.insert(res.loglik_trace.end(), more.loglik_trace.begin() + 1, more.loglik_trace.end());
        res.iterations += more.iterations;
        res.converged = more.converged;
        res.model = std::move(more.model);
    }
    res.model.meta.seed = seed;
    res.model.meta.iterations = res.iterations;
    res.model.meta.loglik = res.loglik_trace.back();
    return res;
}

inline Hapi train(const TrainSet& data, std::size_t k, std::uint64_t seed,
                  const TrainOptions& opts = {}) {
    return train_traced(data, k, seed, opts).model;
}

// ---------------------------------------------------------------------------
// Choosing the number of hidden states

struct KCandidate {
    std::size_t k = 0;
    std::optional<double> validation_loglik;  // empty when training failed
    std::string error;
};

struct KSelection {
    std::size_t best_k = 0;
    Hapi model;
    std::vector<KCandidate> curve;
};

/// Seed used for the K-state model under a base seed.
inline std::uint64_t k_seed(std::uint64_t seed, std::size_t k) {
    return derive_seed(seed, "init/k=" + std::to_string(k));
}

/// Trains one model per K and keeps the one with the highest weighted
/// validation log-likelihood; ties go to the smaller K. Failed K values are
/// recorded and skipped.
inline KSelection select_k(const TrainSet& train_data, const TrainSet& validation,
                           const std::vector<std::size_t>& k_range, std::uint64_t seed,
                           const TrainOptions& opts = {}) {
    if (validation.empty()) throw TrainingError("empty validation set");
    if (k_range.empty()) throw TrainingError("empty range of hidden-state counts");
    if (validation.vocab != train_data.vocab) {
        throw TrainingError("validation set is not encoded with the training vocabulary");
    }
    std::vector<std::size_t> ks = k_range;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    KSelection sel;
    std::optional<double> best;
    for (std::size_t k : ks) {
        KCandidate cand{k, std::nullopt, {}};
        try {
            Hapi m = train(train_data, k, k_seed(seed, k), opts);
            const double ll = total_loglik(m, validation);
            cand.validation_loglik = ll;
            if (!best || ll > *best) {
                best = ll;
                sel.best_k = k;
                sel.model = std::move(m);
            }
        } catch (const Error& e) {
            cand.error = e.what();
        }
        sel.curve.push_back(std::move(cand));
    }
    if (!best) throw TrainingError("training failed for every K in range");
    return sel;
}

// ---------------------------------------------------------------------------
// Sampling

/// Draws a length-T sequence: initial state from pi, then alternately an
/// emission from the current state and a transition to the next state.
inline Symbols sample(const Hapi& m, std::size_t length, Rng& rng) {
    Symbols out;
    out.reserve(length);
    if (length == 0) return out;
    std::size_t state = sample_categorical(rng, m.pi);
    for (std::size_t t = 0; t < length; ++t) {
        out.push_back(sample_categorical(rng, m.emit.row(state)));
        if (t + 1 < length) state = sample_categorical(rng, m.trans.row(state));
    }
    return out;
}

}  // namespace apiusage

#endif  // APIUSAGE_HMM_HPP
