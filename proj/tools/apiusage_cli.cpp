// apiusage: extract usage sequences from micro-IR, train per-object models,
// recommend calls, evaluate against the n-gram baseline, inspect models.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "apiusage.hpp"

using namespace apiusage;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config_file;
    std::optional<std::size_t> jobs;
    bool json = false;

    PipelineConfig config() const {
        PipelineConfig c = config_file.empty() ? PipelineConfig{} : load_config(config_file);
        if (seed) c.eval.seed = *seed;
        if (jobs) c.jobs = *jobs;
        return c;
    }
};

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_text_file(path, text);
    }
}

// --- extract

struct ExtractArgs {
    std::vector<std::string> inputs;
    std::string output = "corpus.jsonl";
    std::string dump_cfg;
    std::string dump_arus;
    std::optional<std::size_t> max_set_size;
};

std::string dump_graphs(const std::vector<std::string>& inputs, const PipelineConfig& cfg, bool arus) {
    std::string out;
    for (const auto& path : inputs) {
        for (const Method& m : parse_methods(read_file(path))) {
            const Cfg graph = build_cfg(m);
            if (!arus) {
                out += cfg_to_dot(graph, m.display());
                continue;
            }
            try {
                out += arus_to_dot(build_arus(m, graph, cfg.extraction.max_branch_nodes), m.display());
            } catch (const BranchCapExceeded& e) {
                out += "// " + m.display() + ": " + e.what() + "\n";
            }
        }
    }
    return out;
}

int run_extract(const Globals& g, const ExtractArgs& a) {
    PipelineConfig cfg = g.config();
    if (a.max_set_size) cfg.extraction.max_set_size = a.max_set_size;
    const ExtractResult r = cmd_extract(a.inputs, cfg);
    save_corpus(r.corpus, a.output);
    if (!a.dump_cfg.empty()) write_output(a.dump_cfg, dump_graphs(a.inputs, cfg, false));
    if (!a.dump_arus.empty()) write_output(a.dump_arus, dump_graphs(a.inputs, cfg, true));
    if (g.json) {
        std::cout << r.summary.json().dump(1) << '\n';
    } else {
        std::cout << r.summary.str() << "corpus written to " << a.output << '\n';
    }
    return 0;
}

// --- train

struct StoreArgs {
    std::string corpus = "corpus.jsonl";
    std::string store = "models";
};

int run_train(const Globals& g, const StoreArgs& a) {
    const PipelineConfig cfg = g.config();
    ModelStore store(a.store);
    const TrainSummary s = cmd_train(load_corpus(a.corpus), store, cfg);
    if (g.json) {
        Json out = Json::array();
        for (const auto& o : s.outcomes) {
            Json rec = {{"key", o.key.types()}, {"occurrences", o.occurrences}};
            if (o.models) {
                rec["k"] = o.models->hapi.num_states();
                rec["iterations"] = o.models->hapi.meta.iterations;
                rec["loglik"] = o.models->hapi.meta.loglik;
            } else {
                rec["skipped"] = o.skip_reason;
            }
            out.push_back(std::move(rec));
        }
        std::cout << out.dump(1) << '\n';
    } else {
        std::cout << s.str();
    }
    return 0;
}

// --- eval

struct EvalArgs {
    StoreArgs where;
    std::string output;
    bool macro = false;
    bool table = false;
};

int run_eval(const Globals& g, const EvalArgs& a) {
    PipelineConfig cfg = g.config();
    if (a.macro) cfg.eval.macro = true;
    const Comparison cmp = cmd_eval(load_corpus(a.where.corpus), ModelStore(a.where.store), cfg);
    write_output(a.output, comparison_csv(cmp));
    if (a.table) std::cerr << comparison_table(cmp);
    for (const auto& k : cmp.skipped_keys) std::cerr << "skipped " << k << ": no model or too few sequences\n";
    return 0;
}

// --- recommend

struct RecommendArgs {
    std::string store = "models";
    std::string types;
    std::string seq;
    std::optional<std::size_t> hole;
    std::size_t k = 10;
    std::string model = "hapi";
};

int run_recommend(const Globals& g, const RecommendArgs& a) {
    const ModelStore store(a.store);
    const ObjectKey key(detail::split_list(a.types));
    const std::vector<std::string> observed = detail::split_list(a.seq);
    const std::size_t hole = a.hole.value_or(observed.size() + 1);
    const Recommendation rec = parse_format(a.model) == ModelFormat::Hapi
                                   ? next_api_call(store.load_hapi(key), observed, hole)
                                   : next_api_call_ngram(store.load_ngram(key), observed, hole);
    const std::size_t shown = std::min(a.k, rec.ranked.size());
    if (g.json) {
        Json out = {{"key", key.types()}, {"model", a.model}, {"hole", hole}, {"ranked", Json::array()}};
        for (std::size_t i = 0; i < shown; ++i) {
            out["ranked"].push_back({{"rank", i + 1}, {"method", rec.ranked[i].method}, {"score", rec.ranked[i].score}});
        }
        std::cout << out.dump(1) << '\n';
        return 0;
    }
    std::cout << "rank  log-prob      method\n";
    for (std::size_t i = 0; i < shown; ++i) {
        std::cout << std::setw(4) << i + 1 << "  " << std::setw(12) << std::fixed << std::setprecision(4)
                  << rec.ranked[i].score << "  " << rec.ranked[i].method << '\n';
    }
    return 0;
}

// --- inspect

struct InspectArgs {
    std::string store = "models";
    std::string types;
    double threshold = 0.01;
    std::string output;
};

int run_inspect(const Globals& g, const InspectArgs& a) {
    const ModelStore store(a.store);
    if (a.types.empty()) {
        for (const auto& e : store.entries()) {
            std::cout << to_string(e.format) << "  " << e.key.str() << "  " << e.file << '\n';
        }
        return 0;
    }
    const Hapi h = store.load_hapi(ObjectKey(detail::split_list(a.types)));
    write_output(a.output, g.json ? detail::dump(hapi_to_json(h)) : hapi_to_dot(h, a.threshold));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learn API usage models from micro-IR and recommend method calls"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "base random seed");
    app.add_option("--config", g.config_file, "key=value settings file")->check(CLI::ExistingFile);
    app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--json", g.json, "machine-readable output");

    ExtractArgs ex;
    auto* extract = app.add_subcommand("extract", "extract usage sequences into a corpus");
    extract->add_option("inputs", ex.inputs, "micro-IR files")->required()->check(CLI::ExistingFile);
    extract->add_option("-o,--output", ex.output, "corpus file (JSON lines)");
    extract->add_option("--dump-cfg", ex.dump_cfg, "write control flow graphs as DOT ('-' for stdout)");
    extract->add_option("--dump-arus", ex.dump_arus, "write usage graphs as DOT ('-' for stdout)");
    extract->add_option("--max-set-size", ex.max_set_size, "largest object set kept for multi-object keys")
        ->check(CLI::PositiveNumber);

    StoreArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train models for every key with enough sequences");
    train_cmd->add_option("corpus", tr.corpus, "corpus file")->required();
    train_cmd->add_option("--model-store", tr.store, "model directory");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "compare stored models with the n-gram baseline");
    eval_cmd->add_option("corpus", ev.where.corpus, "corpus file")->required();
    eval_cmd->add_option("--model-store", ev.where.store, "model directory");
    eval_cmd->add_option("-o,--output", ev.output, "CSV report (stdout when omitted)");
    eval_cmd->add_flag("--macro", ev.macro, "average keys equally in the ALL rows");
    eval_cmd->add_flag("--table", ev.table, "also print a summary table to stderr");

    RecommendArgs rc;
    auto* rec_cmd = app.add_subcommand("recommend", "rank candidate calls for a hole in a sequence");
    rec_cmd->add_option("--model-store", rc.store, "model directory");
    rec_cmd->add_option("--types", rc.types, "object types, comma separated")->required();
    rec_cmd->add_option("--seq", rc.seq, "observed calls, comma separated");
    rec_cmd->add_option("--hole", rc.hole, "1-based hole position (default: after the last call)");
    rec_cmd->add_option("--k", rc.k, "number of candidates shown")->check(CLI::PositiveNumber);
    rec_cmd->add_option("--model", rc.model, "hapi or ngram")->check(CLI::IsMember({"hapi", "ngram"}));

    InspectArgs in;
    auto* inspect_cmd = app.add_subcommand("inspect", "render a stored model as DOT, or list the store");
    inspect_cmd->add_option("--model-store", in.store, "model directory");
    inspect_cmd->add_option("--types", in.types, "object types, comma separated (omit to list)");
    inspect_cmd->add_option("--threshold", in.threshold, "hide probabilities below this");
    inspect_cmd->add_option("-o,--output", in.output, "output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc_parse = app.exit(e);
        return rc_parse == 0 ? 0 : 2;
    }

    try {
        if (*extract) return run_extract(g, ex);
        if (*train_cmd) return run_train(g, tr);
        if (*eval_cmd) return run_eval(g, ev);
        if (*rec_cmd) return run_recommend(g, rc);
        if (*inspect_cmd) return run_inspect(g, in);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 3;
}
