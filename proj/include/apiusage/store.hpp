#ifndef APIUSAGE_STORE_HPP
#define APIUSAGE_STORE_HPP

// On-disk model store: one JSON file per (key, format) plus an index.json
// listing them. Files and the index are replaced by write-then-rename.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "apiusage/error.hpp"
#include "apiusage/hmm.hpp"
#include "apiusage/ngram.hpp"
#include "apiusage/random.hpp"
#include "apiusage/sequence.hpp"

namespace apiusage {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const char* what) {
    if (!j.is_array() || j.size() != rows) {
        throw InputError(std::string(what) + " must have " + std::to_string(rows) + " rows");
    }
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto row = j[r].get<std::vector<double>>();
        if (row.size() != cols) {
            throw InputError(std::string(what) + " row " + std::to_string(r) + " must have " +
                             std::to_string(cols) + " entries");
        }
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c];
    }
    return m;
}

// Doubles are written in shortest round-trip form, so load(save(m)) == m.
inline std::string dump(const Json& j) { return j.dump(1) + "\n"; }

inline Json parse_json(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(source + ": invalid JSON: " + e.what());
    }
}

}  // namespace detail

inline Json hapi_to_json(const Hapi& m) {
    Json j;
    j["format"] = "hapi";
    j["types"] = m.types;
    j["k"] = m.num_states();
    j["vocab"] = m.vocab;
    j["pi"] = m.pi;
    j["a"] = detail::matrix_to_json(m.trans);
    j["b"] = detail::matrix_to_json(m.emit);
    j["train_meta"] = {{"seed", m.meta.seed}, {"iters", m.meta.iterations}, {"loglik", m.meta.loglik}};
    return j;
}

inline Hapi hapi_from_json(const Json& j) {
    try {
        if (j.value("format", "hapi") != "hapi") throw InputError("not an HMM model file");
        Hapi m;
        m.types = j.at("types").get<std::vector<std::string>>();
        const auto k = j.at("k").get<std::size_t>();
        m.vocab = j.at("vocab").get<std::vector<std::string>>();
        m.pi = j.at("pi").get<std::vector<double>>();
        if (m.pi.size() != k) throw InputError("pi must have k entries");
        m.trans = detail::matrix_from_json(j.at("a"), k, k, "a");
        m.emit = detail::matrix_from_json(j.at("b"), k, m.vocab.size(), "b");
        if (j.contains("train_meta")) {
            const Json& meta = j.at("train_meta");
            m.meta.seed = meta.value("seed", std::uint64_t{0});
            m.meta.iterations = meta.value("iters", std::size_t{0});
            m.meta.loglik = meta.value("loglik", 0.0);
        }
        validate(m, 1e-6);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed HMM model: ") + e.what());
    }
}

inline Json ngram_to_json(const NgramModel& m) {
    Json j;
    j["format"] = "ngram";
    j["types"] = m.types;
    j["n"] = m.n;
    j["delta"] = m.delta;
    j["vocab"] = m.vocab;
    Json counts = Json::array();
    for (const auto& [ctx, next] : m.counts) {
        Json pairs = Json::array();
        for (const auto& [sym, c] : next) pairs.push_back({sym, c});
        counts.push_back({{"ctx", ctx}, {"next", pairs}});
    }
    j["counts"] = std::move(counts);
    return j;
}

inline NgramModel ngram_from_json(const Json& j) {
    try {
        if (j.value("format", "") != "ngram") throw InputError("not an n-gram model file");
        NgramModel m;
        m.types = j.at("types").get<std::vector<std::string>>();
        m.n = j.at("n").get<std::size_t>();
        m.delta = j.at("delta").get<double>();
        m.vocab = j.at("vocab").get<std::vector<std::string>>();
        if (m.n < 1 || !(m.delta > 0.0)) throw InputError("bad n-gram order or smoothing constant");
        for (const Json& rec : j.at("counts")) {
            auto ctx = rec.at("ctx").get<NgramContext>();
            if (ctx.size() != m.n - 1) throw InputError("context length must be n-1");
            auto& row = m.counts[std::move(ctx)];
            for (const Json& p : rec.at("next")) {
                const auto sym = p.at(0).get<std::size_t>();
                if (sym >= m.vocab.size()) throw InputError("symbol outside vocabulary");
                row[sym] = p.at(1).get<std::uint64_t>();
            }
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed n-gram model: ") + e.what());
    }
}

enum class ModelFormat { Hapi, Ngram };

inline const char* to_string(ModelFormat f) { return f == ModelFormat::Hapi ? "hapi" : "ngram"; }

inline ModelFormat parse_format(const std::string& s) {
    if (s == "hapi") return ModelFormat::Hapi;
    if (s == "ngram") return ModelFormat::Ngram;
    throw InputError("unknown model format '" + s + "' (expected hapi or ngram)");
}

struct StoreEntry {
    ObjectKey key;
    ModelFormat format = ModelFormat::Hapi;
    std::string file;  // relative to the store root
    Json meta = Json::object();
};

/// Writes `text` next to `path` and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    write_text_file(tmp.string(), text);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

class ModelStore {
public:
    explicit ModelStore(std::filesystem::path root) : root_(std::move(root)) {
        if (std::filesystem::exists(index_path())) load_index();
    }

    const std::filesystem::path& root() const { return root_; }

    /// File name derived from the key: readable prefix plus a hash so long or
    /// colliding prefixes stay unique.
    static std::string file_name(const ObjectKey& key, ModelFormat format) {
        std::string stem;
        for (char c : key.str()) {
            const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
            stem += ok ? c : '_';
        }
        if (stem.size() > 80) stem.resize(80);
        char hash[24];
        std::snprintf(hash, sizeof hash, "%016llx",
                      static_cast<unsigned long long>(derive_seed(0, key.str("\n"))));
        return stem + "-" + hash + "." + to_string(format) + ".json";
    }

    void put(const ObjectKey& key, const Hapi& model, Json meta = Json::object()) {
        put_json(key, ModelFormat::Hapi, hapi_to_json(model), std::move(meta));
    }

    void put(const ObjectKey& key, const NgramModel& model, Json meta = Json::object()) {
        put_json(key, ModelFormat::Ngram, ngram_to_json(model), std::move(meta));
    }

    const StoreEntry* find(const ObjectKey& key, ModelFormat format) const {
        auto it = index_.find({key, format});
        return it == index_.end() ? nullptr : &it->second;
    }

    Hapi load_hapi(const ObjectKey& key) const {
        return hapi_from_json(load_json(key, ModelFormat::Hapi));
    }

    NgramModel load_ngram(const ObjectKey& key) const {
        return ngram_from_json(load_json(key, ModelFormat::Ngram));
    }

    std::vector<StoreEntry> entries() const {
        std::vector<StoreEntry> out;
        for (const auto& [id, e] : index_) out.push_back(e);
        return out;
    }

    void save_index() const {
        Json models = Json::array();
        for (const auto& [id, e] : index_) {
            models.push_back({{"key", e.key.types()},
                              {"format", to_string(e.format)},
                              {"file", e.file},
                              {"meta", e.meta}});
        }
        Json j;
        j["models"] = std::move(models);
        std::filesystem::create_directories(root_);
        write_file_atomic(index_path(), detail::dump(j));
    }

private:
    std::filesystem::path index_path() const { return root_ / "index.json"; }

    void put_json(const ObjectKey& key, ModelFormat format, const Json& model, Json meta) {
        std::filesystem::create_directories(root_);
        StoreEntry e{key, format, file_name(key, format), std::move(meta)};
        write_file_atomic(root_ / e.file, detail::dump(model));
        index_[{key, format}] = std::move(e);
    }

    Json load_json(const ObjectKey& key, ModelFormat format) const {
        const StoreEntry* e = find(key, format);
        if (!e) throw InputError("no model for key " + key.str() + " (" + to_string(format) + ")");
        const std::string path = (root_ / e->file).string();
        return detail::parse_json(read_file(path), path);
    }

    void load_index() {
        const std::string path = index_path().string();
        const Json j = detail::parse_json(read_file(path), path);
        try {
            for (const Json& rec : j.at("models")) {
                StoreEntry e;
                e.key = ObjectKey(rec.at("key").get<std::vector<std::string>>());
                e.format = parse_format(rec.at("format").get<std::string>());
                e.file = rec.at("file").get<std::string>();
                if (rec.contains("meta")) e.meta = rec.at("meta");
                if (!std::filesystem::exists(root_ / e.file)) {
                    throw InputError(path + ": indexed file " + e.file + " is missing");
                }
                const std::pair<ObjectKey, ModelFormat> id{e.key, e.format};
                if (!index_.emplace(id, std::move(e)).second) {
                    throw InputError(path + ": duplicate entry for key " + id.first.str());
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw InputError(path + ": malformed index: " + e.what());
        }
    }

    std::filesystem::path root_;
    std::map<std::pair<ObjectKey, ModelFormat>, StoreEntry> index_;
};

}  // namespace apiusage

#endif  // APIUSAGE_STORE_HPP
