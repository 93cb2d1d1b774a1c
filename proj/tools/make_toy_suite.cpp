// Regenerates the bundled toy models and dataset: make_toy_suite <out_dir> [seed]
#include "toy_suite.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

int main(int argc, char **argv)
{
    if (argc < 2) {
        std::cerr << "usage: make_toy_suite <out_dir> [seed]\n";
        return 1;
    }
    const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 7;
    const auto suite = ctxcert::toy::make_toy_suite(seed);
    const auto paths = ctxcert::toy::write_toy_suite(suite, argv[1]);
    for (const auto &m : paths.models)
        std::cout << m.generic_string() << '\n';
    std::cout << paths.dataset.generic_string() << '\n';
    return 0;
}
