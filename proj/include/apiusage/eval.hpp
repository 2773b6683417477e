#ifndef APIUSAGE_EVAL_HPP
#define APIUSAGE_EVAL_HPP

// Evaluation protocol: occurrence-level splits, the next-call and
// fill-the-hole tasks with top-k accuracy, the hidden-state sensitivity
// curve and the HMM versus n-gram comparison.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "apiusage/error.hpp"
#include "apiusage/hmm.hpp"
#include "apiusage/ngram.hpp"
#include "apiusage/random.hpp"
#include "apiusage/recommend.hpp"
#include "apiusage/sequence.hpp"

namespace apiusage {

struct SplitConfig {
    double train_frac = 0.8;
    double val_frac_of_train = 0.125;
    std::uint64_t min_sequences = 25;
};

struct Split {
    CountedSequences train;
    CountedSequences validation;
    CountedSequences test;
    std::uint64_t seed = 0;
};

inline std::uint64_t total_count(const CountedSequences& data) {
    std::uint64_t n = 0;
    for (const auto& [seq, c] : data) n += c;
    return n;
}

/// Splits the occurrences of one key: a test share, then a validation share
/// of the remainder, the rest for training. A sequence seen c times may land
/// in several parts. Keys with fewer than `min_sequences` occurrences are
/// skipped (empty result).
inline std::optional<Split> split_corpus(const Corpus::Counts& counts, const SplitConfig& config,
                                         std::uint64_t seed) {
    std::vector<const ApiSequence*> distinct;
    std::vector<std::size_t> occurrences;
    for (const auto& [seq, c] : counts) {
        for (std::uint64_t i = 0; i < c; ++i) occurrences.push_back(distinct.size());
        distinct.push_back(&seq);
    }
    const std::uint64_t total = occurrences.size();
    if (total < config.min_sequences || total == 0) return std::nullopt;

    Rng rng(seed);
    shuffle(occurrences, rng);
    const auto pool = static_cast<std::uint64_t>(std::llround(static_cast<double>(total) * config.train_frac));
    const std::uint64_t n_test = total - pool;
    const auto n_val = static_cast<std::uint64_t>(std::llround(static_cast<double>(pool) * config.val_frac_of_train));

    std::vector<std::uint64_t> test(distinct.size(), 0), val(distinct.size(), 0), train(distinct.size(), 0);
    for (std::uint64_t i = 0; i < total; ++i) {
        const std::size_t d = occurrences[i];
        if (i < n_test) {
            ++test[d];
        } else if (i < n_test + n_val) {
            ++val[d];
        } else {
            ++train[d];
        }
    }
    Split split;
    split.seed = seed;
    for (std::size_t d = 0; d < distinct.size(); ++d) {
        if (train[d]) split.train.emplace_back(*distinct[d], train[d]);
        if (val[d]) split.validation.emplace_back(*distinct[d], val[d]);
        if (test[d]) split.test.emplace_back(*distinct[d], test[d]);
    }
    return split;
}

enum class Task { NextCall, FillHole };
enum class ModelKind { Hapi, Ngram };

inline const char* to_string(Task t) { return t == Task::NextCall ? "next_call" : "fill_hole"; }
inline const char* to_string(ModelKind m) { return m == ModelKind::Hapi ? "hapi" : "ngram"; }

/// Hits and totals are occurrence-weighted.
struct EvalReport {
    Task task = Task::NextCall;
    ModelKind model = ModelKind::Hapi;
    std::vector<std::size_t> k_values;
    std::vector<std::uint64_t> hits;
    std::uint64_t total = 0;
    std::uint64_t skipped = 0;

    double accuracy(std::size_t i) const {
        return total ? static_cast<double>(hits[i]) / static_cast<double>(total) : 0.0;
    }
};

namespace detail {

inline ModelKind kind_of(const Hapi&) { return ModelKind::Hapi; }
inline ModelKind kind_of(const NgramModel&) { return ModelKind::Ngram; }

inline std::optional<Symbols> try_encode(const std::vector<std::string>& calls,
                                         const std::vector<std::string>& vocab) {
    Symbols out;
    out.reserve(calls.size());
    for (const auto& c : calls) {
        auto it = std::find(vocab.begin(), vocab.end(), c);
        if (it == vocab.end()) return std::nullopt;
        out.push_back(static_cast<std::size_t>(it - vocab.begin()));
    }
    return out;
}

inline std::size_t rank_of(const Recommendation& rec, const std::string& method) {
    for (std::size_t r = 0; r < rec.ranked.size(); ++r) {
        if (rec.ranked[r].method == method) return r;
    }
    return rec.ranked.size();
}

inline EvalReport empty_report(Task task, ModelKind model, const std::vector<std::size_t>& ks) {
    for (std::size_t k : ks) {
        if (k == 0) throw InputError("k values must be at least 1");
    }
    EvalReport r;
    r.task = task;
    r.model = model;
    r.k_values = ks;
    r.hits.assign(ks.size(), 0);
    return r;
}

inline void record(EvalReport& r, std::size_t rank, std::uint64_t weight) {
    r.total += weight;
    for (std::size_t i = 0; i < r.k_values.size(); ++i) {
        if (rank < r.k_values[i]) r.hits[i] += weight;
    }
}

}  // namespace detail

/// Predict-next: every position i >= 2 of every test sequence is queried with
/// its prefix. Queries touching calls outside the model vocabulary are
/// counted in `skipped`, not in `total`.
template <typename Model>
EvalReport eval_task1(const Model& model, const CountedSequences& test,
                      const std::vector<std::size_t>& k_values) {
    EvalReport report = detail::empty_report(Task::NextCall, detail::kind_of(model), k_values);
    for (const auto& [seq, count] : test) {
        for (std::size_t i = 2; i <= seq.size(); ++i) {
            const std::vector<std::string> prefix(seq.calls.begin(), seq.calls.begin() + (i - 1));
            const auto enc = detail::try_encode(prefix, model.vocab);
            const std::string& truth = seq.calls[i - 1];
            if (!enc || !model.symbol(truth)) {
                report.skipped += count;
                continue;
            }
            const Recommendation rec = recommend(model, *enc, i);
            detail::record(report, detail::rank_of(rec, truth), count);
        }
    }
    return report;
}

/// Hole positions for every test occurrence, drawn uniformly per occurrence.
inline std::vector<std::vector<std::size_t>> draw_holes(const CountedSequences& test,
                                                        std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> holes;
    for (const auto& [seq, count] : test) {
        std::vector<std::size_t> h;
        for (std::uint64_t i = 0; i < count; ++i) h.push_back(1 + uniform_index(rng, seq.size()));
        holes.push_back(std::move(h));
    }
    return holes;
}

/// Fill-the-hole: one seeded random hole per test occurrence.
template <typename Model>
EvalReport eval_task2(const Model& model, const CountedSequences& test,
                      const std::vector<std::size_t>& k_values, std::uint64_t seed) {
    EvalReport report = detail::empty_report(Task::FillHole, detail::kind_of(model), k_values);
    const auto holes = draw_holes(test, seed);
    for (std::size_t n = 0; n < test.size(); ++n) {
        const ApiSequence& seq = test[n].first;
        std::map<std::size_t, std::uint64_t> per_hole;
        for (std::size_t h : holes[n]) ++per_hole[h];
        for (const auto& [hole, weight] : per_hole) {
            std::vector<std::string> observed = seq.calls;
            const std::string truth = observed[hole - 1];
            observed.erase(observed.begin() + static_cast<std::ptrdiff_t>(hole - 1));
            const auto enc = detail::try_encode(observed, model.vocab);
            if (!enc || !model.symbol(truth)) {
                report.skipped += weight;
                continue;
            }
            const Recommendation rec = recommend(model, *enc, hole);
            detail::record(report, detail::rank_of(rec, truth), weight);
        }
    }
    return report;
}

/// Validation log-likelihood for each K; failed K values are gaps.
inline std::vector<KCandidate> sensitivity_curve(const TrainSet& train_data,
                                                 const TrainSet& validation,
                                                 const std::vector<std::size_t>& k_range,
                                                 std::uint64_t seed,
                                                 const TrainOptions& opts = {}) {
    std::vector<KCandidate> curve;
    for (std::size_t k : k_range) {
        KCandidate c{k, std::nullopt, {}};
        try {
            const Hapi m = train(train_data, k, k_seed(seed, k), opts);
            c.validation_loglik = total_loglik(m, validation);
        } catch (const Error& e) {
            c.error = e.what();
        }
        curve.push_back(std::move(c));
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Model comparison

inline std::vector<std::size_t> k_span(std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> out;
    for (std::size_t k = lo; k <= hi; ++k) out.push_back(k);
    return out;
}

struct EvalConfig {
    SplitConfig split;
    std::vector<std::size_t> k_range = k_span(1, 16);
    std::vector<std::size_t> k_values{1, 3, 5, 10};
    TrainOptions train;
    std::size_t ngram_n = 3;
    double ngram_delta = 0.1;
    std::uint64_t seed = 0;
    bool macro = false;
};

inline std::uint64_t split_seed(std::uint64_t seed, const ObjectKey& key) {
    return derive_seed(seed, "split/" + key.str());
}
inline std::uint64_t init_seed(std::uint64_t seed, const ObjectKey& key) {
    return derive_seed(seed, "init/" + key.str());
}
inline std::uint64_t holes_seed(std::uint64_t seed, const ObjectKey& key) {
    return derive_seed(seed, "holes/" + key.str());
}

struct KeyModels {
    ObjectKey key;
    Hapi hapi;
    NgramModel ngram;
    std::vector<KCandidate> curve;
    Split split;
};

/// Splits one key's sequences and fits both models: the HMM on the training
/// part with K chosen on the validation part, the n-gram model on training
/// plus validation. Empty when the key is below the occurrence threshold.
inline std::optional<KeyModels> train_key(const ObjectKey& key, const Corpus::Counts& counts,
                                          const EvalConfig& config) {
    auto split = split_corpus(counts, config.split, split_seed(config.seed, key));
    if (!split) return std::nullopt;
    KeyModels out;
    out.key = key;
    const TrainSet train_data = make_trainset(split->train);
    const TrainSet validation = encode_trainset(split->validation, train_data.vocab);
    if (validation.empty()) throw TrainingError("no validation sequence within the training vocabulary");
    KSelection sel = select_k(train_data, validation, config.k_range, init_seed(config.seed, key),
                              config.train);
    out.hapi = std::move(sel.model);
    out.hapi.types = key.types();
    out.curve = std::move(sel.curve);

    CountedSequences ngram_data = split->train;
    ngram_data.insert(ngram_data.end(), split->validation.begin(), split->validation.end());
    out.ngram = train_ngram(make_trainset(ngram_data), config.ngram_n, config.ngram_delta);
    out.ngram.types = key.types();
    out.split = std::move(*split);
    return out;
}

/// Both tasks for both models, in the order hapi/next, hapi/hole, ngram/next, ngram/hole.
inline std::vector<EvalReport> evaluate_key(const ObjectKey& key, const Hapi& hapi,
                                            const NgramModel& ngram, const CountedSequences& test,
                                            const EvalConfig& config) {
    const std::uint64_t hs = holes_seed(config.seed, key);
    return {eval_task1(hapi, test, config.k_values), eval_task2(hapi, test, config.k_values, hs),
            eval_task1(ngram, test, config.k_values), eval_task2(ngram, test, config.k_values, hs)};
}

struct ReportRow {
    std::string key;
    ModelKind model = ModelKind::Hapi;
    Task task = Task::NextCall;
    std::size_t k = 1;
    std::uint64_t hits = 0;
    std::uint64_t total = 0;
    double accuracy = 0.0;
    std::uint64_t skipped = 0;
};

struct Comparison {
    std::vector<ReportRow> rows;          // per key, then the "ALL" aggregate
    std::vector<std::string> skipped_keys;  // below the occurrence threshold
    std::map<std::string, std::size_t> chosen_k;
};

namespace detail {

inline void append_rows(std::vector<ReportRow>& rows, const std::string& key, const EvalReport& r) {
    for (std::size_t i = 0; i < r.k_values.size(); ++i) {
        rows.push_back({key, r.model, r.task, r.k_values[i], r.hits[i], r.total, r.accuracy(i), r.skipped});
    }
}

/// Pooled (micro) or per-key averaged (macro) rows under key "ALL".
inline std::vector<ReportRow> aggregate_rows(const std::vector<ReportRow>& rows, bool macro) {
    struct Acc {
        std::uint64_t hits = 0, total = 0, skipped = 0;
        double acc_sum = 0.0;
        std::size_t keys = 0;
    };
    std::map<std::tuple<int, int, std::size_t>, Acc> by;
    for (const auto& r : rows) {
        Acc& a = by[{static_cast<int>(r.model), static_cast<int>(r.task), r.k}];
        a.hits += r.hits;
        a.total += r.total;
        a.skipped += r.skipped;
        if (r.total > 0) {
            a.acc_sum += r.accuracy;
            ++a.keys;
        }
    }
    std::vector<ReportRow> out;
    for (const auto& [id, a] : by) {
        ReportRow row;
        row.key = "ALL";
        row.model = static_cast<ModelKind>(std::get<0>(id));
        row.task = static_cast<Task>(std::get<1>(id));
        row.k = std::get<2>(id);
        row.hits = a.hits;
        row.total = a.total;
        row.skipped = a.skipped;
        if (macro) {
            row.accuracy = a.keys ? a.acc_sum / static_cast<double>(a.keys) : 0.0;
        } else {
            row.accuracy = a.total ? static_cast<double>(a.hits) / static_cast<double>(a.total) : 0.0;
        }
        out.push_back(row);
    }
    return out;
}

}  // namespace detail

inline void finish_comparison(Comparison& cmp, bool macro) {
    const auto all = detail::aggregate_rows(cmp.rows, macro);
    cmp.rows.insert(cmp.rows.end(), all.begin(), all.end());
}

/// Splits every key, trains both models on the same data and evaluates them
/// on the same held-out occurrences.
inline Comparison compare_models(const Corpus& corpus, const EvalConfig& config) {
    Comparison cmp;
    for (const auto& [key, counts] : corpus.entries()) {
        auto models = train_key(key, counts, config);
        if (!models) {
            cmp.skipped_keys.push_back(key.str());
            continue;
        }
        cmp.chosen_k[key.str()] = models->hapi.num_states();
        for (const auto& r : evaluate_key(key, models->hapi, models->ngram, models->split.test, config)) {
            detail::append_rows(cmp.rows, key.str(), r);
        }
    }
    finish_comparison(cmp, config.macro);
    return cmp;
}

inline std::string format_accuracy(double a) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", a);
    return buf;
}

inline std::string comparison_csv(const Comparison& cmp) {
    std::ostringstream os;
    os << "key,model,task,k,hits,total,accuracy,skipped\n";
    for (const auto& r : cmp.rows) {
        os << r.key << ',' << to_string(r.model) << ',' << to_string(r.task) << ',' << r.k << ','
           << r.hits << ',' << r.total << ',' << format_accuracy(r.accuracy) << ',' << r.skipped
           << '\n';
    }
    return os.str();
}

/// Aggregate accuracy table: one line per model and task, one column per k.
inline std::string comparison_table(const Comparison& cmp) {
    std::map<std::pair<int, int>, std::vector<const ReportRow*>> lines;
    std::vector<std::size_t> ks;
    for (const auto& r : cmp.rows) {
        if (r.key != "ALL") continue;
        lines[{static_cast<int>(r.task), static_cast<int>(r.model)}].push_back(&r);
        if (std::find(ks.begin(), ks.end(), r.k) == ks.end()) ks.push_back(r.k);
    }
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-10s %-6s", "task", "model");
    os << buf;
    for (std::size_t k : ks) {
        std::snprintf(buf, sizeof buf, " %8s", ("top-" + std::to_string(k)).c_str());
        os << buf;
    }
    os << '\n';
    for (const auto& [id, rows] : lines) {
        std::snprintf(buf, sizeof buf, "%-10s %-6s", to_string(static_cast<Task>(id.first)),
                      to_string(static_cast<ModelKind>(id.second)));
        os << buf;
        for (const ReportRow* r : rows) {
            std::snprintf(buf, sizeof buf, " %7.2f%%", 100.0 * r->accuracy);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace apiusage

#endif  // APIUSAGE_EVAL_HPP
