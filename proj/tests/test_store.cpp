#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "apiusage.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace apiusage;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("apiusage-test-" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Store, HapiJsonRoundTripIsExact) {
    Rng rng(51);
    for (int trial = 0; trial < 50; ++trial) {
        const TrainSet ts = gen::random_trainset(rng, 1 + uniform_index(rng, 6), 8, 6, 5);
        Hapi h = train(ts, 1 + uniform_index(rng, 4), rng());
        h.types = {"java.io.File", "java.io.Writer"};
        const Hapi back = hapi_from_json(detail::parse_json(detail::dump(hapi_to_json(h)), "mem"));
        EXPECT_EQ(back, h);
    }
}

TEST(Store, NgramJsonRoundTripIsExact) {
    Rng rng(52);
    const TrainSet ts = gen::random_trainset(rng, 5, 10, 6, 5);
    NgramModel m = train_ngram(ts, 3, 0.1);
    m.types = {"x.A"};
    EXPECT_EQ(ngram_from_json(detail::parse_json(detail::dump(ngram_to_json(m)), "mem")), m);
}

TEST(Store, RejectsBrokenModels) {
    Rng rng(53);
    Hapi h = oracle::random_model(2, 2, rng);
    Json j = hapi_to_json(h);
    j["a"][0][0] = 5.0;
    EXPECT_THROW(hapi_from_json(j), InputError);
    Json wrong = ngram_to_json(train_ngram(gen::random_trainset(rng, 2, 2, 3, 1)));
    EXPECT_THROW(hapi_from_json(wrong), InputError);
    EXPECT_THROW(detail::parse_json("{not json", "x"), InputError);
    EXPECT_THROW(parse_format("bigram"), InputError);
}

TEST(Store, PutFindLoadAndReopen) {
    const fs::path dir = fresh_dir("store");
    Rng rng(54);
    Hapi h = train(gen::random_trainset(rng, 4, 6, 5, 3), 2, 9);
    const ObjectKey key(std::vector<std::string>{"android.media.MediaRecorder"});
    const ObjectKey pair(std::vector<std::string>{"java.io.File", "java.io.Writer"});
    h.types = key.types();
    NgramModel ng = train_ngram(gen::random_trainset(rng, 3, 4, 4, 2));
    ng.types = pair.types();
    {
        ModelStore store(dir);
        store.put(key, h, {{"k", 2}});
        store.put(pair, ng);
        store.save_index();
        EXPECT_TRUE(store.find(key, ModelFormat::Hapi));
        EXPECT_FALSE(store.find(key, ModelFormat::Ngram));
    }
    ModelStore reopened(dir);
    EXPECT_EQ(reopened.entries().size(), 2u);
    EXPECT_EQ(reopened.load_hapi(key), h);
    EXPECT_EQ(reopened.load_ngram(pair), ng);
    EXPECT_EQ(reopened.find(key, ModelFormat::Hapi)->meta.at("k"), 2);
    EXPECT_THROW(reopened.load_ngram(key), InputError);
    // no temporaries left behind
    for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".tmp");
    fs::remove_all(dir);
}

TEST(Store, FileNamesAreDistinctAndSafe) {
    const ObjectKey a(std::vector<std::string>{"a.B", "c.D"});
    const ObjectKey b(std::vector<std::string>{"a.B+c.D"});
    EXPECT_NE(ModelStore::file_name(a, ModelFormat::Hapi), ModelStore::file_name(b, ModelFormat::Hapi));
    EXPECT_NE(ModelStore::file_name(a, ModelFormat::Hapi), ModelStore::file_name(a, ModelFormat::Ngram));
    const std::string f = ModelStore::file_name(ObjectKey(std::vector<std::string>{"x/y$z"}), ModelFormat::Ngram);
    EXPECT_EQ(f.find('/'), std::string::npos);
    EXPECT_TRUE(f.ends_with(".ngram.json"));
}

TEST(Store, IndexPointingAtMissingFileIsAnError) {
    const fs::path dir = fresh_dir("missing");
    fs::create_directories(dir);
    std::ofstream(dir / "index.json") << R"({"models":[{"key":["x.A"],"format":"hapi","file":"gone.json"}]})";
    EXPECT_THROW(ModelStore{dir}, InputError);
    std::ofstream(dir / "index.json") << R"({"models": 3})";
    EXPECT_THROW(ModelStore{dir}, InputError);
    fs::remove_all(dir);
}
