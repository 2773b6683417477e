#ifndef APIUSAGE_HPP
#define APIUSAGE_HPP

#include "apiusage/arus.hpp"
#include "apiusage/cfg.hpp"
#include "apiusage/error.hpp"
#include "apiusage/eval.hpp"
#include "apiusage/hmm.hpp"
#include "apiusage/method_ir.hpp"
#include "apiusage/ngram.hpp"
#include "apiusage/pipeline.hpp"
#include "apiusage/random.hpp"
#include "apiusage/recommend.hpp"
#include "apiusage/sequence.hpp"
#include "apiusage/store.hpp"

#endif  // APIUSAGE_HPP
