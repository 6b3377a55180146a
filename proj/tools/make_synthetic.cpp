#include "longbasis/panel.hpp"
#include "longbasis/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace longbasis;

// Writes the bundled synthetic reference and book panels.
int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic two-population panel pair"};
    std::string out = "data/synthetic";
    std::uint64_t seed = 1;
    app.add_option("--out", out, "output directory");
    app.add_option("--seed", seed, "world seed");
    CLI11_PARSE(app, argc, argv);

    SyntheticWorldSpec spec;
    spec.seed = seed;
    const SyntheticWorld w = make_synthetic_world(spec);
    std::filesystem::create_directories(out);
    for (const auto& [name, panel] : {std::pair{"reference.csv", &w.reference}, std::pair{"book.csv", &w.book}}) {
        std::ofstream f(std::filesystem::path(out) / name, std::ios::binary);
        write_panel(f, *panel);
        if (!f) {
            std::cerr << "cannot write " << name << "\n";
            return 1;
        }
    }
    return 0;
}
