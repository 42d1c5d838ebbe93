// End-to-end checks of the installed command-line surface: these shell out to
// the real binary and inspect files and exit codes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "sevkit/config.hpp"
#include "sevkit/image_io.hpp"
#include "sevkit/network.hpp"
#include "sevkit/synthetic.hpp"

namespace fs = std::filesystem;
using namespace sevkit;

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string log = (fs::temp_directory_path() / "sevkit_cli_out.txt").string();
    const std::string cmd = std::string(SEVKIT_CLI_PATH) + " " + args + " > " + log + " 2>&1";
    const int raw = std::system(cmd.c_str());
    std::ifstream in(log);
    std::ostringstream ss;
    ss << in.rdbuf();
    return {WEXITSTATUS(raw), ss.str()};
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

bool same_pixels(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("gen-noise with sigma 0 reproduces inputs after the 8-bit round trip") {
    fs::path in = fresh_dir("cli_clean");
    fs::path out = fresh_dir("cli_noisy0");
    auto corpus = make_synthetic_corpus(3, 24, 24, 3, 8);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        write_image_png(corpus[i], (in / ("im" + std::to_string(i) + ".png")).string());
    }

    auto r = run_cli("gen-noise --in " + in.string() + " --out " + out.string() +
                     " --noise gaussian --sigma 0 --seed 3");
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("# effective-config") != std::string::npos);

    for (std::size_t i = 0; i < corpus.size(); ++i) {
        Tensor orig = read_image((in / ("im" + std::to_string(i) + ".png")).string());
        Tensor back = read_image((out / ("im" + std::to_string(i) + ".png")).string());
        CHECK(same_pixels(orig, back));
    }

    // manifest lists one entry per image
    std::ifstream mf(out / "manifest.json");
    std::string manifest((std::istreambuf_iterator<char>(mf)), std::istreambuf_iterator<char>());
    std::size_t entries = 0, pos = 0;
    while ((pos = manifest.find("\"file\"", pos)) != std::string::npos) {
        ++entries;
        ++pos;
    }
    CHECK(entries == 3);
}

TEST_CASE("gen-noise usage and data errors") {
    fs::path in = fresh_dir("cli_badnoise");
    write_image_png(make_synthetic_corpus(1, 16, 16, 1, 2)[0], (in / "a.png").string());

    auto usage = run_cli("gen-noise --in " + in.string() + " --out " + in.string() +
                         " --noise salting");
    CHECK(usage.exit_code == 1);

    fs::path broken = fresh_dir("cli_broken");
    {
        std::ofstream bad(broken / "bad.png", std::ios::binary);
        bad << "this is not a png";
    }
    auto data = run_cli("gen-noise --in " + broken.string() + " --out " + broken.string());
    CHECK(data.exit_code == 2);
}

TEST_CASE("re-running from the echoed config reproduces outputs byte-identically") {
    fs::path in = fresh_dir("cli_echo_in");
    auto corpus = make_synthetic_corpus(2, 20, 20, 3, 9);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        write_image_png(corpus[i], (in / ("im" + std::to_string(i) + ".png")).string());
    }
    fs::path out1 = fresh_dir("cli_echo_out1");
    auto first = run_cli("gen-noise --in " + in.string() + " --out " + out1.string() +
                         " --noise speckle --sigma 75 --base laplace --seed 11");
    REQUIRE(first.exit_code == 0);

    // Extract the `key = value` echo block.
    std::ostringstream cfg;
    std::istringstream lines(first.output);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.find(" = ") != std::string::npos) cfg << line << "\n";
    }
    fs::path out2 = fresh_dir("cli_echo_out2");
    sevkit::KVConfig kv = sevkit::KVConfig::parse(cfg.str());
    kv.set("out", out2.string());
    const std::string cfg_path = (fs::temp_directory_path() / "cli_echo.cfg").string();
    std::ofstream(cfg_path) << kv.to_text();

    auto second = run_cli("gen-noise --config " + cfg_path);
    REQUIRE(second.exit_code == 0);

    for (std::size_t i = 0; i < corpus.size(); ++i) {
        std::ifstream f1(out1 / ("im" + std::to_string(i) + ".png"), std::ios::binary);
        std::ifstream f2(out2 / ("im" + std::to_string(i) + ".png"), std::ios::binary);
        std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(b1 == b2);
        CHECK_FALSE(b1.empty());
    }
}

TEST_CASE("denoise with a zero-weight checkpoint is identity modulo pad/crop") {
    NetworkSpec spec;
    spec.base_channels = 8;
    spec.depth = 2;
    spec.blocks_per_stage = 1;
    Network net = build(spec);
    for (auto& p : net.params()) p.value->fill(0.0f);
    const std::string ckpt = (fs::temp_directory_path() / "cli_zero.eqnet").string();
    save_network(net, ckpt);

    fs::path in = fresh_dir("cli_den_in");
    // odd sizes force the reflective pad + crop path
    auto img = make_synthetic_corpus(1, 19, 23, 3, 10)[0];
    write_image_png(img, (in / "odd.png").string());
    fs::path out = fresh_dir("cli_den_out");

    auto r = run_cli("denoise --ckpt " + ckpt + " --in " + in.string() + " --out " + out.string());
    REQUIRE(r.exit_code == 0);
    Tensor orig = read_image((in / "odd.png").string());
    Tensor back = read_image((out / "odd.png").string());
    CHECK(same_pixels(orig, back));
}

TEST_CASE("denoise rejects a corrupt checkpoint with a data error") {
    const std::string ckpt = (fs::temp_directory_path() / "cli_corrupt.eqnet").string();
    std::ofstream(ckpt, std::ios::binary) << "EQNOPE garbage";
    fs::path in = fresh_dir("cli_den_in2");
    write_image_png(make_synthetic_corpus(1, 16, 16, 3, 3)[0], (in / "a.png").string());
    auto r = run_cli("denoise --ckpt " + ckpt + " --in " + in.string() + " --out " + in.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("data error") != std::string::npos);
}

TEST_CASE("train then eval then audit round trip through the CLI") {
    fs::path corpus_dir = fresh_dir("cli_train_in");
    auto corpus = make_synthetic_corpus(4, 40, 40, 3, 11);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        write_image_png(corpus[i], (corpus_dir / ("im" + std::to_string(i) + ".png")).string());
    }
    fs::path out = fresh_dir("cli_train_out");

    const std::string netspec_path = (fs::temp_directory_path() / "cli_netspec.cfg").string();
    std::ofstream(netspec_path) << "base_channels = 8\ndepth = 1\nblocks_per_stage = 1\n"
                                << "block_kind = baseline_rb\n";
    const std::string traincfg_path = (fs::temp_directory_path() / "cli_traincfg.cfg").string();
    std::ofstream(traincfg_path) << "patch_size = 32\nbatch_size = 2\n";

    auto tr = run_cli("train --in " + corpus_dir.string() + " --out " + out.string() +
                      " --netspec " + netspec_path + " --train-config " + traincfg_path +
                      " --steps 3 --seed 2");
    REQUIRE(tr.exit_code == 0);
    CHECK(fs::exists(out / "checkpoint.eqnet"));
    CHECK(fs::exists(out / "loss_curve.csv"));
    {
        std::ifstream csv(out / "loss_curve.csv");
        std::string header;
        std::getline(csv, header);
        CHECK(header == "step,lr,loss");
    }

    fs::path eval_out = fresh_dir("cli_eval_out");
    auto ev = run_cli("eval --ckpt " + (out / "checkpoint.eqnet").string() + " --in " +
                      corpus_dir.string() + " --out " + eval_out.string() + " --seed 4");
    REQUIRE(ev.exit_code == 0);
    {
        std::ifstream csv(eval_out / "report.csv");
        std::string header;
        std::getline(csv, header);
        CHECK(header == "image_id,noise_spec,psnr,ssim");
    }

    fs::path audit_out = fresh_dir("cli_audit_out");
    auto au = run_cli("audit --ckpt " + (out / "checkpoint.eqnet").string() + " --out " +
                      audit_out.string() + " --probes 3 --probe-size 16");
    REQUIRE(au.exit_code == 0);
    std::ifstream rep(audit_out / "audit.txt");
    std::string text((std::istreambuf_iterator<char>(rep)), std::istreambuf_iterator<char>());
    CHECK(text.find("all nodes order1: true") != std::string::npos);
}

TEST_CASE("sweep --table4 runs the whole variant list") {
    fs::path corpus_dir = fresh_dir("cli_sweep_in");
    auto corpus = make_synthetic_corpus(3, 64, 64, 3, 12);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        write_image_png(corpus[i], (corpus_dir / ("im" + std::to_string(i) + ".png")).string());
    }
    fs::path out = fresh_dir("cli_sweep_out");
    auto r = run_cli("sweep --table4 --in " + corpus_dir.string() + " --out " + out.string() +
                     " --steps 2 --patch 64 --seed 3");
    REQUIRE(r.exit_code == 0);
    std::ifstream tf(out / "sweep.txt");
    std::string table((std::istreambuf_iterator<char>(tf)), std::istreambuf_iterator<char>());
    CHECK(table.find("(1a)") != std::string::npos);
    CHECK(table.find("(2f)") != std::string::npos);
    CHECK(table.find("(x) second-order gating") != std::string::npos);
}
