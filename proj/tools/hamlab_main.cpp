#include <iostream>

#include "hamlab/harness.hpp"

int main(int argc, char** argv) {
    using namespace hamlab;
    try {
        const harness::ExperimentConfig cfg = harness::parse_args(argc, argv);
        return harness::run(cfg, std::cout);
    } catch (const harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n\n";
        harness::usage(std::cerr);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
