#ifndef APIUSAGE_SEQUENCE_HPP
#define APIUSAGE_SEQUENCE_HPP

#include <algorithm>
#include <compare>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "apiusage/arus.hpp"
#include "apiusage/cfg.hpp"
#include "apiusage/error.hpp"
#include "apiusage/method_ir.hpp"

namespace apiusage {

/// Class-name prefixes that identify API types.
class ApiFilter {
public:
    ApiFilter() : prefixes_{"android.", "java."} {}
    explicit ApiFilter(std::vector<std::string> prefixes) : prefixes_(std::move(prefixes)) {
        if (prefixes_.empty()) throw InputError("API filter needs at least one prefix");
    }

    bool matches(const std::string& class_name) const {
        return std::any_of(prefixes_.begin(), prefixes_.end(), [&](const std::string& p) {
            return class_name.compare(0, p.size(), p) == 0;
        });
    }

    /// Only calls on API classes count as API actions; allocations, field
    /// accesses and operations never do.
    bool is_api_action(const ActionNode& a) const {
        return a.kind == ActionKind::Invoke && matches(a.owner_class);
    }

    const std::vector<std::string>& prefixes() const { return prefixes_; }

private:
    std::vector<std::string> prefixes_;
};

inline void mark_api(Arus& arus, const ApiFilter& filter) {
    for (auto& a : arus.actions) a.is_api = filter.is_api_action(a);
}

/// Sorted, duplicate-free set of type names. One type keys a single-object
/// model, two or more a usage-dependent object set.
class ObjectKey {
public:
    ObjectKey() = default;
    explicit ObjectKey(std::vector<std::string> types) : types_(std::move(types)) {
        std::sort(types_.begin(), types_.end());
        types_.erase(std::unique(types_.begin(), types_.end()), types_.end());
        if (types_.empty()) throw InputError("object key needs at least one type");
    }
    explicit ObjectKey(const std::set<std::string>& types)
        : ObjectKey(std::vector<std::string>(types.begin(), types.end())) {}

    const std::vector<std::string>& types() const { return types_; }
    std::size_t size() const { return types_.size(); }
    bool contains(const std::string& t) const {
        return std::binary_search(types_.begin(), types_.end(), t);
    }

    std::string str(const std::string& sep = "+") const {
        std::string out;
        for (std::size_t i = 0; i < types_.size(); ++i) out += (i ? sep : "") + types_[i];
        return out;
    }

    friend auto operator<=>(const ObjectKey&, const ObjectKey&) = default;
    friend bool operator==(const ObjectKey&, const ObjectKey&) = default;

private:
    std::vector<std::string> types_;
};

/// Ordered "C.m" call labels.
struct ApiSequence {
    std::vector<std::string> calls;

    std::size_t size() const { return calls.size(); }
    friend auto operator<=>(const ApiSequence&, const ApiSequence&) = default;
    friend bool operator==(const ApiSequence&, const ApiSequence&) = default;
};

using KeyedSequence = std::pair<ObjectKey, ApiSequence>;

inline constexpr std::size_t kMinSequenceLength = 2;

namespace detail {

inline ApiSequence api_calls(const Arus& arus, const std::set<std::size_t>& action_ids,
                             const ApiFilter& filter) {
    ApiSequence seq;
    for (std::size_t id : action_ids) {  // ids are in execution order
        const ActionNode& a = arus.actions[id];
        if (filter.is_api_action(a)) seq.calls.push_back(a.label);
    }
    return seq;
}

inline std::set<std::string> api_types_of(const Arus& arus, std::size_t action,
                                          const ApiFilter& filter) {
    std::set<std::string> types;
    for (std::size_t obj : arus.objects_of(action)) {
        if (filter.matches(arus.objects[obj].type)) types.insert(arus.objects[obj].type);
    }
    return types;
}

}  // namespace detail

/// One sequence per API-typed object node: its data-adjacent API calls in
/// execution order. Sequences shorter than two calls are dropped.
inline std::vector<KeyedSequence> extract_single(const Arus& arus, const ApiFilter& filter) {
    std::vector<KeyedSequence> out;
    for (const auto& obj : arus.objects) {
        if (!filter.matches(obj.type)) continue;
        const auto ids = arus.actions_of(obj.id);
        ApiSequence seq = detail::api_calls(arus, {ids.begin(), ids.end()}, filter);
        if (seq.size() >= kMinSequenceLength) {
            out.emplace_back(ObjectKey(std::vector<std::string>{obj.type}), std::move(seq));
        }
    }
    return out;
}

/// Type sets of the API objects around each API action, keeping sets of two
/// or more types, in order of first appearance.
inline std::vector<ObjectKey> usage_dependent_sets(const Arus& arus, const ApiFilter& filter) {
    std::vector<ObjectKey> out;
    for (const auto& a : arus.actions) {
        if (!filter.is_api_action(a)) continue;
        const auto types = detail::api_types_of(arus, a.id, filter);
        if (types.size() < 2) continue;
        ObjectKey key(types);
        if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(std::move(key));
    }
    return out;
}

/// API calls touching any object whose type is in `key`, in execution order.
/// Empty unless some API action touches objects of every type in the key.
inline std::optional<ApiSequence> extract_multi(const Arus& arus, const ObjectKey& key,
                                                const ApiFilter& filter) {
    bool co_occur = false;
    for (const auto& a : arus.actions) {
        if (!filter.is_api_action(a)) continue;
        const auto types = detail::api_types_of(arus, a.id, filter);
        if (std::all_of(key.types().begin(), key.types().end(),
                        [&](const std::string& t) { return types.count(t) > 0; })) {
            co_occur = true;
            break;
        }
    }
    if (!co_occur) return std::nullopt;

    std::set<std::size_t> ids;
    for (const auto& obj : arus.objects) {
        if (!key.contains(obj.type)) continue;
        for (std::size_t id : arus.actions_of(obj.id)) ids.insert(id);
    }
    ApiSequence seq = detail::api_calls(arus, ids, filter);
    if (seq.size() < kMinSequenceLength) return std::nullopt;
    return seq;
}

struct ExtractionConfig {
    std::size_t max_branch_nodes = 10;
    std::size_t min_method_instructions = 7;
    std::optional<std::size_t> max_set_size;  // unlimited when empty
};

enum class MethodStatus { Extracted, TooShort, BranchCap, Malformed };

struct MethodExtraction {
    MethodStatus status = MethodStatus::Extracted;
    std::size_t paths = 0;
    std::vector<KeyedSequence> entries;  // distinct, first-occurrence order
    std::string detail;
};

inline MethodExtraction extract_method(const Method& method, const ExtractionConfig& config,
                                       const ApiFilter& filter) {
    MethodExtraction out;
    if (method.instructions.size() < config.min_method_instructions) {
        out.status = MethodStatus::TooShort;
        return out;
    }
    const Cfg cfg = build_cfg(method);
    std::vector<Arus> graphs;
    try {
        graphs = build_arus(method, cfg, config.max_branch_nodes);
    } catch (const BranchCapExceeded& e) {
        out.status = MethodStatus::BranchCap;
        out.detail = e.what();
        return out;
    } catch (const MalformedPathError& e) {
        out.status = MethodStatus::Malformed;
        out.detail = e.what();
        return out;
    }
    out.paths = graphs.size();

    std::set<KeyedSequence> seen;
    auto add = [&](KeyedSequence entry) {
        if (seen.insert(entry).second) out.entries.push_back(std::move(entry));
    };
    for (const Arus& g : graphs) {
        for (auto& entry : extract_single(g, filter)) add(std::move(entry));
        for (const ObjectKey& key : usage_dependent_sets(g, filter)) {
            if (config.max_set_size && key.size() > *config.max_set_size) continue;
            if (auto seq = extract_multi(g, key, filter)) add({key, std::move(*seq)});
        }
    }
    return out;
}

/// Counted sequences per object key.
class Corpus {
public:
    using Counts = std::map<ApiSequence, std::uint64_t>;

    void add(const ObjectKey& key, const ApiSequence& seq, std::uint64_t count = 1) {
        if (count == 0) throw InputError("sequence count must be positive");
        entries_[key][seq] += count;
    }

    void merge(const Corpus& other) {
        for (const auto& [key, counts] : other.entries_) {
            for (const auto& [seq, c] : counts) add(key, seq, c);
        }
    }

    /// D for one key: total occurrences.
    std::uint64_t total(const ObjectKey& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return 0;
        std::uint64_t d = 0;
        for (const auto& [seq, c] : it->second) d += c;
        return d;
    }

    const std::map<ObjectKey, Counts>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    std::size_t key_count() const { return entries_.size(); }

    friend bool operator==(const Corpus&, const Corpus&) = default;

private:
    std::map<ObjectKey, Counts> entries_;
};

inline Corpus aggregate_corpus(const std::vector<std::vector<KeyedSequence>>& per_method) {
    Corpus corpus;
    for (const auto& entries : per_method) {
        for (const auto& [key, seq] : entries) corpus.add(key, seq);
    }
    return corpus;
}

// JSON-lines persistence: {"types":[...],"seq":[...],"count":N} per record.

inline std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& [key, counts] : corpus.entries()) {
        for (const auto& [seq, c] : counts) {
            nlohmann::ordered_json rec;
            rec["types"] = key.types();
            rec["seq"] = seq.calls;
            rec["count"] = c;
            out += rec.dump();
            out += '\n';
        }
    }
    return out;
}

inline Corpus corpus_from_jsonl(const std::string& text, const std::string& source = "corpus") {
    Corpus corpus;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto bad = [&](const std::string& why) {
            return InputError(source + ":" + std::to_string(line_no) + ": " + why);
        };
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw bad(std::string("invalid JSON: ") + e.what());
        }
        if (!rec.is_object() || !rec.contains("types") || !rec.contains("seq") ||
            !rec.contains("count")) {
            throw bad("record needs \"types\", \"seq\" and \"count\"");
        }
        try {
            auto types = rec.at("types").get<std::vector<std::string>>();
            auto calls = rec.at("seq").get<std::vector<std::string>>();
            if (!rec.at("count").is_number_unsigned()) throw bad("count must be a positive integer");
            const auto count = rec.at("count").get<std::uint64_t>();
            if (types.empty()) throw bad("empty type list");
            if (calls.size() < kMinSequenceLength) throw bad("sequence shorter than two calls");
            if (count == 0) throw bad("count must be positive");
            corpus.add(ObjectKey(std::move(types)), ApiSequence{std::move(calls)}, count);
        } catch (const nlohmann::json::exception& e) {
            throw bad(std::string("malformed record: ") + e.what());
        }
    }
    return corpus;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("error while writing " + path);
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
    write_text_file(path, corpus_to_jsonl(corpus));
}

inline Corpus load_corpus(const std::string& path) {
    return corpus_from_jsonl(read_file(path), path);
}

}  // namespace apiusage

#endif  // APIUSAGE_SEQUENCE_HPP
