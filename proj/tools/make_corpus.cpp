// Generates a procedural clean-image corpus for desk-scale experiments.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>

#include "sevkit/image_io.hpp"
#include "sevkit/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic clean-image corpus generator"};
    std::string out_dir = "corpus";
    std::size_t count = 36, size = 96, channels = 3;
    std::uint64_t seed = 1;
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--count", count, "number of images");
    app.add_option("--size", size, "image side length");
    app.add_option("--channels", channels, "1 (gray) or 3 (rgb)");
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    std::filesystem::create_directories(out_dir);
    auto corpus = sevkit::make_synthetic_corpus(count, size, size, channels, seed);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img%03zu.png", i);
        sevkit::write_image_png(corpus[i], (std::filesystem::path(out_dir) / name).string());
    }
    std::printf("wrote %zu images to %s\n", corpus.size(), out_dir.c_str());
    return 0;
}
