// Acceptance suite runner: one pass/fail line per criterion, nonzero exit on
// any failure. The same criteria back the CLI `acceptance` subcommand.

#include <cstdio>
#include <cstring>
#include <string>

#include "hamlab/acceptance.hpp"

int main(int argc, char** argv) {
    uint64_t seed = 2026;
    std::string out = "acceptance_out";
    unsigned threads = 0;
    bool determinism = true;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--seed") && i + 1 < argc)
            seed = std::stoull(argv[++i]);
        else if (!std::strcmp(argv[i], "--out") && i + 1 < argc)
            out = argv[++i];
        else if (!std::strcmp(argv[i], "--threads") && i + 1 < argc)
            threads = static_cast<unsigned>(std::stoul(argv[++i]));
        else if (!std::strcmp(argv[i], "--no-determinism"))
            determinism = false;
        else {
            std::fprintf(stderr, "usage: acceptance_suite [--seed N] [--out DIR] [--threads N] [--no-determinism]\n");
            return 2;
        }
    }

    const auto results = hamlab::acceptance::run_all(seed, out, threads, determinism);
    bool all_pass = true;
    double total = 0.0;
    for (const auto& r : results) {
        std::printf("[%s] criterion %2d %-26s %7.2fs  %s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.seconds, r.detail.c_str());
        all_pass = all_pass && r.pass;
        total += r.seconds;
    }
    std::printf("%zu criteria, %.1fs total: %s\n", results.size(), total,
                all_pass ? "ALL PASS" : "FAILURES PRESENT");
    return all_pass ? 0 : 1;
}
