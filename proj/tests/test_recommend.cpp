#include <gtest/gtest.h>

#include <cmath>

#include "apiusage.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace apiusage;

namespace {

Symbols fill(const Symbols& observed, std::size_t hole, std::size_t v) {
    Symbols s = observed;
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(hole - 1), v);
    return s;
}

std::vector<std::string> names_of(const Recommendation& r) {
    std::vector<std::string> out;
    for (const auto& s : r.ranked) out.push_back(s.method);
    return out;
}

}  // namespace

TEST(Recommend, ScoresAreFilledSequenceProbabilities) {
    Rng rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = 1 + uniform_index(rng, 4);
        const std::size_t m = 1 + uniform_index(rng, 5);
        Hapi h = oracle::random_model(k, m, rng);
        Symbols observed;
        const std::size_t len = uniform_index(rng, 6);
        for (std::size_t t = 0; t < len; ++t) observed.push_back(uniform_index(rng, m));
        const std::size_t hole = 1 + uniform_index(rng, len + 1);
        const Recommendation rec = next_api_call(h, observed, hole);
        ASSERT_EQ(rec.ranked.size(), m);
        EXPECT_EQ(rec.hole_position, hole);
        std::vector<double> want(m);
        for (std::size_t v = 0; v < m; ++v) want[v] = std::log(oracle::hmm_prob(h, fill(observed, hole, v)));
        for (const auto& s : rec.ranked) {
            const double w = want[*h.symbol(s.method)];
            EXPECT_NEAR(s.score, w, 1e-9 * std::max(1.0, std::abs(w)));
        }
        // order is exactly the library's scores under the tie rule
        std::vector<std::string> names;
        std::vector<double> scores;
        for (const auto& s : rec.ranked) {
            names.push_back(s.method);
            scores.push_back(s.score);
        }
        EXPECT_EQ(names, oracle::rank_by(names, scores));
    }
}

TEST(Recommend, TiesBreakLexicographically) {
    Hapi h;
    h.vocab = {"z.Z.b", "z.Z.a", "z.Z.c"};
    h.pi = {1.0};
    h.trans = Matrix(1, 1, 1.0);
    h.emit = Matrix(1, 3);
    h.emit(0, 0) = 0.4;
    h.emit(0, 1) = 0.4;
    h.emit(0, 2) = 0.2;
    const Recommendation rec = next_api_call(h, std::vector<std::string>{"z.Z.c"}, 2);
    EXPECT_EQ(names_of(rec), (std::vector<std::string>{"z.Z.a", "z.Z.b", "z.Z.c"}));
    EXPECT_EQ(top_k(rec, 2), (std::vector<std::string>{"z.Z.a", "z.Z.b"}));
    EXPECT_EQ(top_k(rec, 10).size(), 3u);
    EXPECT_THROW(top_k(rec, 0), InputError);
}

TEST(Recommend, NgramScoresAreFilledSequenceProbabilities) {
    Rng rng(32);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + uniform_index(rng, 5);
        const TrainSet ts = gen::random_trainset(rng, m, 1 + uniform_index(rng, 8), 5, 4);
        const NgramModel model = train_ngram(ts, 3, 0.1);
        Symbols observed;
        const std::size_t len = uniform_index(rng, 5);
        for (std::size_t t = 0; t < len; ++t) observed.push_back(uniform_index(rng, m));
        const std::size_t hole = 1 + uniform_index(rng, len + 1);
        const Recommendation rec = next_api_call_ngram(model, observed, hole);
        std::vector<std::string> names;
        std::vector<double> want;
        for (std::size_t v = 0; v < m; ++v) {
            // chain rule by hand from conditional probabilities
            const Symbols full = fill(observed, hole, v);
            double lp = 0.0;
            for (std::size_t t = 0; t < full.size(); ++t) {
                std::vector<std::string> ctx;
                for (std::size_t u = t >= 2 ? t - 2 : 0; u < t; ++u) ctx.push_back(model.vocab[full[u]]);
                lp += std::log(ngram_prob(model, ctx, model.vocab[full[t]]));
            }
            names.push_back(model.vocab[v]);
            want.push_back(lp);
        }
        for (const auto& s : rec.ranked) {
            const double w = want[*model.symbol(s.method)];
            EXPECT_NEAR(s.score, w, 1e-12 * std::max(1.0, std::abs(w)));
        }
    }
}

TEST(Recommend, HoleBoundsAndVocabulary) {
    Rng rng(33);
    Hapi h = oracle::random_model(2, 3, rng);
    const Symbols obs{0, 1};
    EXPECT_THROW(next_api_call(h, obs, 0), InputError);
    EXPECT_THROW(next_api_call(h, obs, 4), InputError);
    EXPECT_NO_THROW(next_api_call(h, obs, 3));
    EXPECT_NO_THROW(next_api_call(h, Symbols{}, 1));
    EXPECT_THROW(next_api_call(h, std::vector<std::string>{"c0", "nope"}, 1), OutOfVocabularyError);
    EXPECT_THROW(next_api_call(h, Symbols{7}, 1), OutOfVocabularyError);

    TrainSet ts;
    ts.vocab = h.vocab;
    ts.items = {{{0, 1, 2}, 1}};
    const NgramModel ng = train_ngram(ts);
    EXPECT_THROW(next_api_call_ngram(ng, obs, 4), InputError);
    EXPECT_THROW(next_api_call_ngram(ng, std::vector<std::string>{"nope"}, 1), OutOfVocabularyError);
}

TEST(Recommend, ImpossibleCandidatesRankLast) {
    Hapi h;
    h.vocab = {"a", "b", "c"};
    h.pi = {1.0, 0.0};
    h.trans = Matrix(2, 2);
    h.trans(0, 1) = 1.0;
    h.trans(1, 1) = 1.0;
    h.emit = Matrix(2, 3);
    h.emit(0, 0) = 1.0;
    h.emit(1, 1) = 0.7;
    h.emit(1, 2) = 0.3;
    const Recommendation rec = next_api_call(h, std::vector<std::string>{"a"}, 2);
    EXPECT_EQ(names_of(rec), (std::vector<std::string>{"b", "c", "a"}));
    EXPECT_EQ(rec.ranked.back().score, -INFINITY);
    EXPECT_NEAR(rec.ranked.front().score, std::log(0.7), 1e-15);
}
