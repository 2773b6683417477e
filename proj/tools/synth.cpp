// Writes a synthetic micro-IR corpus of MediaRecorder sessions.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "synth.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate synthetic MediaRecorder methods in micro-IR"};
    std::size_t methods = 400;
    std::uint64_t seed = 0;
    std::string out;
    app.add_option("-n,--methods", methods, "number of methods")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "random seed");
    app.add_option("-o,--output", out, "output file (stdout when omitted)");
    CLI11_PARSE(app, argc, argv);

    const std::string text = synth::recorder_corpus(methods, seed);
    if (out.empty()) {
        std::cout << text;
        return 0;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f || !(f << text)) {
        std::cerr << "error: cannot write " << out << '\n';
        return 2;
    }
    return 0;
}
