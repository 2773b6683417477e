#include <gtest/gtest.h>

#include <cmath>

#include "apiusage.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace apiusage;

TEST(Ngram, WorkedValue) {
    TrainSet ts;
    ts.vocab = {"a", "b", "c"};
    ts.items = {{{0, 1, 2}, 1}};
    const NgramModel m = train_ngram(ts, 3, 0.1);
    EXPECT_NEAR(ngram_prob(m, {"a", "b"}, "c"), 1.1 / 1.3, 1e-15);
    EXPECT_NEAR(ngram_prob(m, {"a", "b"}, "a"), 0.1 / 1.3, 1e-15);
    // unseen context
    EXPECT_NEAR(ngram_prob(m, {"c", "c"}, "a"), 1.0 / 3.0, 1e-15);
    // padded start contexts
    EXPECT_NEAR(ngram_prob(m, std::vector<std::string>{}, "a"), 1.1 / 1.3, 1e-15);
    EXPECT_NEAR(ngram_prob(m, {"a"}, "b"), 1.1 / 1.3, 1e-15);
}

TEST(Ngram, CountsAreWeighted) {
    TrainSet ts;
    ts.vocab = {"a", "b"};
    ts.items = {{{0, 1}, 4}, {{0, 0}, 1}};
    const NgramModel m = train_ngram(ts, 3, 0.5);
    EXPECT_NEAR(ngram_prob(m, {"a"}, "b"), 4.5 / 6.0, 1e-15);
    EXPECT_NEAR(ngram_prob(m, {"a"}, "a"), 1.5 / 6.0, 1e-15);
}

TEST(Ngram, SequenceProbabilitiesSumToOne) {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + uniform_index(rng, 4);
        const TrainSet ts = gen::random_trainset(rng, m, 1 + uniform_index(rng, 8), 5, 4);
        const std::size_t n = 1 + uniform_index(rng, 3);
        const NgramModel model = train_ngram(ts, n, 0.1);
        for (std::size_t len = 1; len <= 4; ++len) {
            double total = 0.0;
            for (const auto& seq : oracle::all_sequences(m, len)) total += std::exp(ngram_seq_prob(model, seq));
            EXPECT_NEAR(total, 1.0, 1e-12) << "m=" << m << " n=" << n << " len=" << len;
        }
    }
}

TEST(Ngram, Errors) {
    TrainSet ts;
    ts.vocab = {"a", "b"};
    EXPECT_THROW(train_ngram(ts), TrainingError);
    ts.items = {{{0, 1}, 1}};
    EXPECT_THROW(train_ngram(ts, 3, 0.0), TrainingError);
    EXPECT_THROW(train_ngram(ts, 0, 0.1), TrainingError);
    const NgramModel m = train_ngram(ts);
    EXPECT_THROW(ngram_prob(m, {"a"}, "zz"), OutOfVocabularyError);
    EXPECT_THROW(ngram_prob(m, {"zz"}, "a"), OutOfVocabularyError);
    EXPECT_THROW(ngram_seq_prob(m, std::vector<std::string>{"a", "q"}), OutOfVocabularyError);
}
