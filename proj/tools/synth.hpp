#ifndef APIUSAGE_TOOLS_SYNTH_HPP
#define APIUSAGE_TOOLS_SYNTH_HPP

// Synthetic usage data: a hand-built ground-truth HMM over MediaRecorder
// calls and a renderer that turns sampled call sequences into micro-IR
// methods. Shared by the generator tool and the acceptance checks.

#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "apiusage.hpp"

namespace synth {

using apiusage::Hapi;
using apiusage::Matrix;
using apiusage::Rng;

inline const std::string kRecorder = "android.media.MediaRecorder";

/// Two recorder patterns, audio and video. Each writes a run of output
/// files of random length and then ends its own way: audio recordings are
/// stopped, video ones reset. Inside the run the last two calls no longer
/// tell the branches apart; the hidden state still does.
inline Hapi recorder_patterns() {
    const std::vector<std::string> calls{"init",          "setAudioSource", "setVideoSource",
                                         "setOutputFile", "stop",           "reset",
                                         "release"};
    Hapi h;
    h.types = {kRecorder};
    for (const auto& c : calls) h.vocab.push_back(kRecorder + "." + c);
    // states: 0 init | 1 audio source, 2 audio files, 3 stop | 4 video source, 5 video files,
    // 6 reset | 7 release
    const std::size_t k = 8;
    h.pi.assign(k, 0.0);
    h.pi[0] = 1.0;
    h.trans = Matrix(k, k);
    h.emit = Matrix(k, calls.size());
    h.trans(0, 1) = 0.5;
    h.trans(0, 4) = 0.5;
    for (std::size_t base : {1u, 4u}) {
        h.trans(base, base + 1) = 1.0;
        h.trans(base + 1, base + 1) = 0.35;
        h.trans(base + 1, base + 2) = 0.65;
        h.trans(base + 2, 7) = 1.0;
        h.emit(base + 1, 3) = 1.0;
    }
    h.trans(7, 7) = 1.0;
    for (std::size_t i : {0u, 1u, 4u, 7u}) h.emit(i, i == 0 ? 0 : i == 1 ? 1 : i == 4 ? 2 : 6) = 1.0;
    h.emit(3, 4) = 1.0;
    h.emit(6, 5) = 1.0;
    apiusage::validate(h);
    return h;
}

/// Samples calls until `last` is emitted or `max_len` is reached.
inline std::vector<std::string> sample_calls(const Hapi& h, const std::string& last, std::size_t max_len,
                                             Rng& rng) {
    std::vector<std::string> out;
    std::size_t state = apiusage::sample_categorical(rng, h.pi);
    while (out.size() < max_len) {
        out.push_back(h.vocab[apiusage::sample_categorical(rng, h.emit.row(state))]);
        if (out.back() == last) break;
        state = apiusage::sample_categorical(rng, h.trans.row(state));
    }
    return out;
}

/// One method that allocates a receiver and makes the given calls on it.
/// "C.init" becomes the constructor call.
inline std::string render_method(const std::string& name, const std::string& cls,
                                 const std::vector<std::string>& calls) {
    std::ostringstream os;
    os << ".method " << name << " 3 (v2:int)\n";
    os << "  new-instance v0 " << cls << '\n';
    for (const auto& c : calls) {
        const std::string method = c.substr(c.rfind('.') + 1);
        if (method == "init") {
            os << "  invoke-direct " << cls << ".<init> (v0)\n";
        } else {
            os << "  invoke-virtual " << cls << '.' << method << " (v0, v2)\n";
        }
    }
    os << "  const v1 0\n";
    os << "  return v1\n";
    os << ".end\n";
    return os.str();
}

/// `count` methods sampled from the recorder patterns.
inline std::string recorder_corpus(std::size_t count, std::uint64_t seed) {
    const Hapi h = recorder_patterns();
    Rng rng = apiusage::make_rng(seed, "synth/recorder");
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
        const auto calls = sample_calls(h, kRecorder + ".release", 40, rng);
        out += render_method("com.synth.Recording.session" + std::to_string(i), kRecorder, calls);
    }
    return out;
}

}  // namespace synth

#endif  // APIUSAGE_TOOLS_SYNTH_HPP
