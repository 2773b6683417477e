#ifndef APIUSAGE_PIPELINE_HPP
#define APIUSAGE_PIPELINE_HPP

// extract -> train -> eval, driven by one configuration and one seed.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "apiusage/cfg.hpp"
#include "apiusage/error.hpp"
#include "apiusage/eval.hpp"
#include "apiusage/hmm.hpp"
#include "apiusage/method_ir.hpp"
#include "apiusage/ngram.hpp"
#include "apiusage/sequence.hpp"
#include "apiusage/store.hpp"

namespace apiusage {

struct PipelineConfig {
    ApiFilter filter;
    ExtractionConfig extraction;
    EvalConfig eval;
    std::size_t jobs = 1;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::uint64_t parse_uint(const std::string& s, const std::string& what) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw InputError(what + ": expected a non-negative integer, got '" + s + "'");
    }
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw InputError(what + ": integer out of range '" + s + "'");
    }
}

inline std::size_t parse_positive(const std::string& s, const std::string& what) {
    const auto v = parse_uint(s, what);
    if (v == 0) throw InputError(what + " must be positive");
    return static_cast<std::size_t>(v);
}

inline double parse_double(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw InputError(what + ": expected a number, got '" + s + "'");
    return v;
}

}  // namespace detail

/// "1..16", "3" or "1,2,4,8".
inline std::vector<std::size_t> parse_k_list(const std::string& text, const std::string& what) {
    std::vector<std::size_t> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const auto lo = detail::parse_positive(detail::trim(text.substr(0, dots)), what);
        const auto hi = detail::parse_positive(detail::trim(text.substr(dots + 2)), what);
        if (hi < lo) throw InputError(what + ": empty range " + text);
        return k_span(lo, hi);
    }
    for (const auto& item : detail::split_list(text)) out.push_back(detail::parse_positive(item, what));
    if (out.empty()) throw InputError(what + " must not be empty");
    return out;
}

/// Applies one key=value setting.
inline void set_option(PipelineConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "api_prefixes") {
        c.filter = ApiFilter(split_list(value));
    } else if (key == "max_branch_nodes") {
        c.extraction.max_branch_nodes = parse_positive(value, key);
    } else if (key == "min_method_instructions") {
        c.extraction.min_method_instructions = parse_positive(value, key);
    } else if (key == "max_set_size") {
        c.extraction.max_set_size = parse_positive(value, key);
    } else if (key == "min_sequences") {
        c.eval.split.min_sequences = parse_positive(value, key);
    } else if (key == "k_range") {
        c.eval.k_range = parse_k_list(value, key);
    } else if (key == "k_values") {
        c.eval.k_values = parse_k_list(value, key);
    } else if (key == "seed") {
        c.eval.seed = parse_uint(value, key);
    } else if (key == "ngram_delta") {
        c.eval.ngram_delta = parse_double(value, key);
        if (!(c.eval.ngram_delta > 0.0)) throw InputError("ngram_delta must be positive");
    } else if (key == "ngram_order") {
        c.eval.ngram_n = parse_positive(value, key);
    } else if (key == "train_frac" || key == "val_frac") {
        const double f = parse_double(value, key);
        if (!(f > 0.0 && f < 1.0)) throw InputError(key + " must lie strictly between 0 and 1");
        (key == "train_frac" ? c.eval.split.train_frac : c.eval.split.val_frac_of_train) = f;
    } else if (key == "em_tol") {
        c.eval.train.tol = parse_double(value, key);
        if (!(c.eval.train.tol > 0.0)) throw InputError("em_tol must be positive");
    } else if (key == "em_max_iter") {
        c.eval.train.max_iter = parse_positive(value, key);
    } else if (key == "em_restarts") {
        c.eval.train.restarts = parse_positive(value, key);
    } else if (key == "jobs") {
        c.jobs = parse_positive(value, key);
    } else if (key == "macro") {
        if (value != "true" && value != "false") throw InputError("macro must be true or false");
        c.eval.macro = value == "true";
    } else {
        throw InputError("unknown setting '" + key + "'");
    }
}

/// key=value lines; '#' starts a comment.
inline PipelineConfig parse_config(const std::string& text, const std::string& source = "config",
                                   PipelineConfig base = {}) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError(source + ":" + std::to_string(line_no) + ": expected key=value");
        }
        try {
            set_option(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        } catch (const InputError& e) {
            throw InputError(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return base;
}

inline PipelineConfig load_config(const std::string& path) { return parse_config(read_file(path), path); }

/// Runs fn(0..n-1) on up to `jobs` threads. The first exception is rethrown
/// after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// extract

struct ExtractSummary {
    std::size_t files = 0;
    std::size_t methods = 0;
    std::size_t duplicates = 0;
    std::size_t too_short = 0;
    std::size_t branch_cap = 0;
    std::size_t malformed = 0;
    std::size_t analyzed = 0;
    std::size_t paths = 0;
    std::uint64_t single_sequences = 0;
    std::uint64_t multi_sequences = 0;
    std::size_t distinct_keys = 0;

    std::string str() const {
        std::ostringstream os;
        os << "files                 " << files << '\n'
           << "methods               " << methods << '\n'
           << "  duplicates          " << duplicates << '\n'
           << "  too short           " << too_short << '\n'
           << "  over branch cap     " << branch_cap << '\n'
           << "  malformed paths     " << malformed << '\n'
           << "methods analyzed      " << analyzed << '\n'
           << "paths                 " << paths << '\n'
           << "single-object seqs    " << single_sequences << '\n'
           << "multi-object seqs     " << multi_sequences << '\n'
           << "distinct keys         " << distinct_keys << '\n';
        return os.str();
    }

    Json json() const {
        return {{"files", files},           {"methods", methods},
                {"duplicates", duplicates}, {"too_short", too_short},
                {"branch_cap", branch_cap}, {"malformed", malformed},
                {"analyzed", analyzed},     {"paths", paths},
                {"single_sequences", single_sequences},
                {"multi_sequences", multi_sequences},
                {"distinct_keys", distinct_keys}};
    }
};

struct ExtractResult {
    Corpus corpus;
    ExtractSummary summary;
};

/// Methods from several sources; a method name seen again (in the same or a
/// later file) is a duplicate and only its first body is kept.
inline ExtractResult extract_methods(const std::vector<Method>& methods, const PipelineConfig& config,
                                     std::size_t duplicates = 0) {
    ExtractResult out;
    out.summary.methods = methods.size() + duplicates;
    out.summary.duplicates = duplicates;
    for (const Method& m : methods) {
        const MethodExtraction ex = extract_method(m, config.extraction, config.filter);
        switch (ex.status) {
            case MethodStatus::TooShort: ++out.summary.too_short; continue;
            case MethodStatus::BranchCap: ++out.summary.branch_cap; continue;
            case MethodStatus::Malformed: ++out.summary.malformed; continue;
            case MethodStatus::Extracted: break;
        }
        ++out.summary.analyzed;
        out.summary.paths += ex.paths;
        for (const auto& [key, seq] : ex.entries) {
            out.corpus.add(key, seq);
            ++(key.size() == 1 ? out.summary.single_sequences : out.summary.multi_sequences);
        }
    }
    out.summary.distinct_keys = out.corpus.key_count();
    return out;
}

inline ExtractResult cmd_extract(const std::vector<std::string>& inputs, const PipelineConfig& config) {
    std::vector<Method> all;
    for (const auto& path : inputs) {
        std::vector<Method> methods;
        try {
            methods = parse_methods(read_file(path));
        } catch (const IoError&) {
            throw;
        } catch (const InputError& e) {
            throw InputError(path + ": " + e.what());
        }
        all.insert(all.end(), std::make_move_iterator(methods.begin()),
                   std::make_move_iterator(methods.end()));
    }
    const std::size_t before = all.size();
    all = dedup_methods(std::move(all));
    ExtractResult r = extract_methods(all, config, before - all.size());
    r.summary.files = inputs.size();
    return r;
}

// ---------------------------------------------------------------------------
// train

struct KeyTrainOutcome {
    ObjectKey key;
    std::uint64_t occurrences = 0;
    std::optional<KeyModels> models;
    std::string skip_reason;  // set when no model was trained
};

struct TrainSummary {
    std::vector<KeyTrainOutcome> outcomes;

    std::size_t trained() const {
        return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(),
                                                      [](const auto& o) { return o.models.has_value(); }));
    }

    std::string str() const {
        std::ostringstream os;
        for (const auto& o : outcomes) {
            os << o.key.str() << " (" << o.occurrences << " sequences): ";
            if (o.models) {
                os << "K=" << o.models->hapi.num_states() << ", " << o.models->hapi.meta.iterations
                   << " iterations, loglik " << o.models->hapi.meta.loglik << '\n';
            } else {
                os << "skipped, " << o.skip_reason << '\n';
            }
        }
        os << trained() << " of " << outcomes.size() << " keys trained\n";
        return os.str();
    }
};

inline Json curve_json(const std::vector<KCandidate>& curve) {
    Json out = Json::array();
    for (const auto& c : curve) {
        Json p = {{"k", c.k}};
        p["validation_loglik"] = c.validation_loglik ? Json(*c.validation_loglik) : Json(nullptr);
        if (!c.error.empty()) p["error"] = c.error;
        out.push_back(std::move(p));
    }
    return out;
}

/// Trains both models for every key meeting the occurrence threshold, in a
/// worker pool; the store is written afterwards from a single thread in key
/// order.
inline TrainSummary cmd_train(const Corpus& corpus, ModelStore& store, const PipelineConfig& config) {
    TrainSummary summary;
    std::vector<const Corpus::Counts*> counts;
    for (const auto& [key, c] : corpus.entries()) {
        summary.outcomes.push_back({key, corpus.total(key), std::nullopt, {}});
        counts.push_back(&c);
    }
    parallel_for(counts.size(), config.jobs, [&](std::size_t i) {
        KeyTrainOutcome& o = summary.outcomes[i];
        try {
            o.models = train_key(o.key, *counts[i], config.eval);
            if (!o.models) {
                o.skip_reason = "below the threshold of " + std::to_string(config.eval.split.min_sequences);
            }
        } catch (const TrainingError& e) {
            o.skip_reason = e.what();
        }
    });
    for (const auto& o : summary.outcomes) {
        if (!o.models) continue;
        const Hapi& h = o.models->hapi;
        store.put(o.key, h,
                  {{"k", h.num_states()},
                   {"loglik", h.meta.loglik},
                   {"iters", h.meta.iterations},
                   {"seed", h.meta.seed},
                   {"train_occurrences", total_count(o.models->split.train)},
                   {"curve", curve_json(o.models->curve)}});
        store.put(o.key, o.models->ngram,
                  {{"n", o.models->ngram.n},
                   {"delta", o.models->ngram.delta},
                   {"train_occurrences",
                    total_count(o.models->split.train) + total_count(o.models->split.validation)}});
    }
    store.save_index();
    return summary;
}

// ---------------------------------------------------------------------------
// eval

/// Re-derives each key's split from the seed and scores the stored models on
/// its test part. Keys without stored models are listed as skipped.
inline Comparison cmd_eval(const Corpus& corpus, const ModelStore& store, const PipelineConfig& config) {
    struct Job {
        ObjectKey key;
        const Corpus::Counts* counts;
        std::vector<EvalReport> reports;
        std::size_t k = 0;
        bool skipped = false;
    };
    std::vector<Job> jobs;
    for (const auto& [key, c] : corpus.entries()) jobs.push_back({key, &c, {}, 0, false});
    parallel_for(jobs.size(), config.jobs, [&](std::size_t i) {
        Job& j = jobs[i];
        const auto split = split_corpus(*j.counts, config.eval.split, split_seed(config.eval.seed, j.key));
        if (!split || !store.find(j.key, ModelFormat::Hapi) || !store.find(j.key, ModelFormat::Ngram)) {
            j.skipped = true;
            return;
        }
        const Hapi hapi = store.load_hapi(j.key);
        const NgramModel ngram = store.load_ngram(j.key);
        j.k = hapi.num_states();
        j.reports = evaluate_key(j.key, hapi, ngram, split->test, config.eval);
    });
    Comparison cmp;
    for (const Job& j : jobs) {
        if (j.skipped) {
            cmp.skipped_keys.push_back(j.key.str());
            continue;
        }
        cmp.chosen_k[j.key.str()] = j.k;
        for (const auto& r : j.reports) detail::append_rows(cmp.rows, j.key.str(), r);
    }
    finish_comparison(cmp, config.eval.macro);
    return cmp;
}

// ---------------------------------------------------------------------------
// inspect

inline std::string format_prob(double p) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", p);
    return buf;
}

/// DOT rendering of an HMM: a start node with initial probabilities, one node
/// per state listing its likely calls, and transition edges. Anything below
/// 0.01 is left out; shown values are rounded to two decimals.
inline std::string hapi_to_dot(const Hapi& m, double threshold = 0.01) {
    std::ostringstream os;
    const std::string name = m.types.empty() ? "hapi" : ObjectKey(m.types).str();
    os << "digraph \"" << detail::dot_escape(name) << "\" {\n";
    os << "  rankdir=LR;\n";
    os << "  start [shape=point];\n";
    for (std::size_t i = 0; i < m.num_states(); ++i) {
        std::vector<std::pair<double, std::string>> calls;
        for (std::size_t v = 0; v < m.vocab_size(); ++v) {
            if (m.emit(i, v) >= threshold) calls.emplace_back(m.emit(i, v), m.vocab[v]);
        }
        std::stable_sort(calls.begin(), calls.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        os << "  s" << i << " [shape=box, label=\"state " << i;
        for (const auto& [p, call] : calls) os << "\\l" << detail::dot_escape(call) << "  " << format_prob(p);
        os << "\\l\"];\n";
    }
    for (std::size_t i = 0; i < m.num_states(); ++i) {
        if (m.pi[i] >= threshold) os << "  start -> s" << i << " [label=\"" << format_prob(m.pi[i]) << "\"];\n";
    }
    for (std::size_t i = 0; i < m.num_states(); ++i) {
        for (std::size_t j = 0; j < m.num_states(); ++j) {
            if (m.trans(i, j) >= threshold) {
                os << "  s" << i << " -> s" << j << " [label=\"" << format_prob(m.trans(i, j)) << "\"];\n";
            }
        }
    }
    os << "}\n";
    return os.str();
}

}  // namespace apiusage

#endif  // APIUSAGE_PIPELINE_HPP
