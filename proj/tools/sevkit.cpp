// Command-line front end: gen-noise, train, denoise, eval, audit, sweep.
//
// Every subcommand echoes its fully resolved configuration as a `key = value`
// block before running; feeding that block back through --config reproduces
// the run byte-identically. Exit codes: 0 success, 1 usage, 2 data error,
// 3 assertion-level failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <string>

#include "sevkit/audit.hpp"
#include "sevkit/config.hpp"
#include "sevkit/image_io.hpp"
#include "sevkit/metrics.hpp"
#include "sevkit/network.hpp"
#include "sevkit/noise.hpp"
#include "sevkit/rng.hpp"
#include "sevkit/synthetic.hpp"
#include "sevkit/tensor.hpp"
#include "sevkit/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AssertionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Defaults, then config file, then explicit command-line flags. Keys written
// by either of the last two count as "touched": handlers use that to rank an
// explicit flag above a value coming from a secondary file (netspec or
// train-config).
class OptionSet {
public:
    void declare(const std::string& key, const std::string& default_value) {
        kv_.set(key, default_value);
    }
    void load_config(const std::string& path) {
        const sevkit::KVConfig file = sevkit::KVConfig::load_file(path);
        for (const auto& [k, v] : file.items()) {
            if (!kv_.has(k)) throw DataError("config: unknown key '" + k + "' in " + path);
            kv_.set(k, v);
            touched_.insert(k);
        }
    }
    void override_from_cli(const std::string& key, const CLI::Option* opt, const std::string& value) {
        if (opt->count() > 0) {
            kv_.set(key, value);
            touched_.insert(key);
        }
    }
    bool touched(const std::string& key) const { return touched_.count(key) > 0; }

    /// Handlers write fully resolved values back before echoing, so that the
    /// echoed block re-runs byte-identically.
    void resolve(const std::string& key, const std::string& value) {
        kv_.set(key, value);
        touched_.insert(key);
    }

    const sevkit::KVConfig& kv() const { return kv_; }

    void echo(const std::string& subcommand) const {
        std::cout << "# effective-config (sevkit " << subcommand << ")\n" << kv_.to_text()
                  << std::flush;
    }

private:
    sevkit::KVConfig kv_;
    std::set<std::string> touched_;
};

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw DataError("cannot create directory: " + path);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write: " + path);
    out << text;
}

sevkit::Network load_checkpoint(const std::string& path) {
    try {
        return sevkit::load_network(path);
    } catch (const std::exception& e) {
        throw DataError(std::string("checkpoint load failed: ") + e.what());
    }
}

std::vector<sevkit::Tensor> load_corpus(const std::string& dir) {
    try {
        return sevkit::load_image_dir(dir);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

// --------------------------------------------------------------------------

int cmd_gen_noise(OptionSet& opts) {
    opts.echo("gen-noise");
    const auto& kv = opts.kv();
    const std::string in_dir = kv.get_or("in", "");
    const std::string out_dir = kv.get_or("out", "out");
    if (in_dir.empty()) throw CLI::ValidationError("gen-noise", "--in is required");
    ensure_dir(out_dir);

    sevkit::noise::NoiseSpec spec;
    try {
        spec = sevkit::noise::NoiseSpec::from_text(
            "family = " + kv.get_or("noise", "gaussian") + "\nsigma = " + kv.get_or("sigma", "20") +
            "\nalpha = " + kv.get_or("alpha", "6") + "\nbase_dist = " +
            kv.get_or("base", "gaussian") + "\nvariant_kind = " + kv.get_or("variant", "sincos") +
            "\nseed = " + kv.get_or("seed", "1"));
    } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError("gen-noise", e.what());
    }

    json manifest = json::array();
    std::size_t index = 0;
    std::vector<std::string> files;
    try {
        files = sevkit::list_image_files(in_dir);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    if (files.empty()) throw DataError("no images found in " + in_dir);
    for (const auto& path : files) {
        sevkit::Tensor clean;
        try {
            clean = sevkit::read_image(path);
        } catch (const std::exception& e) {
            throw DataError(e.what());
        }
        sevkit::noise::NoiseSpec per_image = spec;
        per_image.seed = sevkit::derive_seed(spec.seed, index);
        double clipped = 0.0;
        sevkit::Tensor noisy = sevkit::noise::apply(clean, per_image, &clipped);
        const std::string out_name = fs::path(path).stem().string() + ".png";
        sevkit::write_image_png(noisy, (fs::path(out_dir) / out_name).string());
        manifest.push_back({{"file", out_name},
                            {"source", path},
                            {"family", sevkit::noise::to_string(per_image.family)},
                            {"sigma", per_image.sigma},
                            {"alpha", per_image.alpha},
                            {"base_dist", sevkit::noise::to_string(per_image.base_dist)},
                            {"variant_kind", sevkit::noise::to_string(per_image.variant_kind)},
                            {"seed", per_image.seed},
                            {"clipped_fraction", clipped}});
        ++index;
    }
    write_text_file((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
    std::cout << "wrote " << index << " noisy images to " << out_dir << "\n";
    return 0;
}

int cmd_denoise(OptionSet& opts) {
    opts.echo("denoise");
    const auto& kv = opts.kv();
    const std::string ckpt = kv.get_or("ckpt", "");
    const std::string in_dir = kv.get_or("in", "");
    const std::string out_dir = kv.get_or("out", "out");
    if (ckpt.empty() || in_dir.empty()) {
        throw CLI::ValidationError("denoise", "--ckpt and --in are required");
    }
    ensure_dir(out_dir);
    sevkit::Network net = load_checkpoint(ckpt);
    const std::size_t mult = std::size_t(1) << net.spec.depth;
    auto files = sevkit::list_image_files(in_dir);
    if (files.empty()) throw DataError("no images found in " + in_dir);
    for (const auto& path : files) {
        sevkit::Tensor image;
        try {
            image = sevkit::read_image(path);
        } catch (const std::exception& e) {
            throw DataError(e.what());
        }
        sevkit::Tensor padded = sevkit::reflect_pad_to_multiple(image, mult);
        sevkit::Tensor out = sevkit::crop(net.denoise(padded), image.h(), image.w());
        const std::string out_name = fs::path(path).stem().string() + ".png";
        sevkit::write_image_png(out, (fs::path(out_dir) / out_name).string());
    }
    std::cout << "denoised " << files.size() << " images to " << out_dir << "\n";
    return 0;
}

int cmd_train(OptionSet& opts) {
    const auto& kv = opts.kv();
    const std::string in_dir = kv.get_or("in", "");
    const std::string out_dir = kv.get_or("out", "out");
    if (in_dir.empty()) throw CLI::ValidationError("train", "--in is required");
    ensure_dir(out_dir);

    sevkit::NetworkSpec spec;
    const std::string netspec_path = kv.get_or("netspec", "");
    if (!netspec_path.empty()) {
        std::ifstream in(netspec_path);
        if (!in) throw DataError("cannot open netspec: " + netspec_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        spec = sevkit::NetworkSpec::from_text(ss.str());
    }

    sevkit::train::TrainConfig cfg;
    const std::string cfg_path = kv.get_or("train-config", "");
    if (!cfg_path.empty()) {
        std::ifstream in(cfg_path);
        if (!in) throw DataError("cannot open train config: " + cfg_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        cfg = sevkit::train::TrainConfig::from_text(ss.str());
    }
    // --seed is the single reproducibility knob: it pins both the parameter
    // init and the sampling streams, overriding any seed inside the files.
    // An explicit --steps (or --config steps) outranks the train-config file.
    cfg.seed = kv.get_u64("seed");
    spec.seed = kv.get_u64("seed");
    if (opts.touched("steps") || cfg_path.empty()) cfg.steps = kv.get_u64("steps");
    opts.resolve("steps", std::to_string(cfg.steps));
    opts.echo("train");

    auto corpus = load_corpus(in_dir);
    sevkit::train::TrainResult result = sevkit::train::train(spec, cfg, corpus);

    sevkit::save_network(result.net, (fs::path(out_dir) / "checkpoint.eqnet").string());
    sevkit::train::save_train_state(result.final_state,
                                    (fs::path(out_dir) / "train_state.eqts").string());
    write_text_file((fs::path(out_dir) / "loss_curve.csv").string(),
                    sevkit::train::curve_to_csv(result.curve));
    write_text_file((fs::path(out_dir) / "netspec.cfg").string(), result.net.spec.to_text());
    write_text_file((fs::path(out_dir) / "train_config.cfg").string(), cfg.to_text());

    if (result.diverged) {
        std::cout << "training diverged at step " << result.divergence_step
                  << (result.expected_unstable ? " (flagged expected_unstable)" : "") << "\n";
    } else {
        std::cout << "trained " << result.curve.size() << " steps; final loss "
                  << result.curve.back().loss << "\n";
    }
    std::cout << "checkpoint: " << (fs::path(out_dir) / "checkpoint.eqnet").string() << "\n";
    return 0;
}

int cmd_eval(OptionSet& opts) {
    opts.echo("eval");
    const auto& kv = opts.kv();
    const std::string ckpt = kv.get_or("ckpt", "");
    const std::string in_dir = kv.get_or("in", "");
    const std::string out_dir = kv.get_or("out", "out");
    if (ckpt.empty() || in_dir.empty()) {
        throw CLI::ValidationError("eval", "--ckpt and --in are required");
    }
    ensure_dir(out_dir);
    sevkit::Network net = load_checkpoint(ckpt);
    auto corpus = load_corpus(in_dir);

    sevkit::train::EvalGrid grid;
    const std::string grid_path = kv.get_or("grid", "");
    if (!grid_path.empty()) {
        std::ifstream in(grid_path);
        if (!in) throw DataError("cannot open grid: " + grid_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        grid = sevkit::train::EvalGrid::from_text(ss.str());
    } else {
        grid = sevkit::train::EvalGrid::benchmark_default(kv.get_u64("seed"));
    }

    sevkit::metrics::MetricReport report = sevkit::train::evaluate(net, grid, corpus);
    write_text_file((fs::path(out_dir) / "report.csv").string(), report.to_csv());
    write_text_file((fs::path(out_dir) / "report.txt").string(), report.to_table());
    write_text_file((fs::path(out_dir) / "grid.cfg").string(), grid.to_text());
    std::cout << report.to_table();
    return 0;
}

int cmd_audit(OptionSet& opts) {
    opts.echo("audit");
    const auto& kv = opts.kv();
    const std::string ckpt = kv.get_or("ckpt", "");
    const std::string out_dir = kv.get_or("out", "out");
    if (ckpt.empty()) throw CLI::ValidationError("audit", "--ckpt is required");
    ensure_dir(out_dir);
    sevkit::Network net = load_checkpoint(ckpt);

    const std::uint64_t seed = kv.get_u64("seed");
    const std::size_t probes = kv.get_u64("probes");
    const std::size_t size = kv.get_u64("probe-size");
    const std::size_t mult = std::size_t(1) << net.spec.depth;
    const std::size_t dim = (size + mult - 1) / mult * mult;
    auto probe_images = sevkit::make_synthetic_corpus(probes, dim, dim, net.spec.in_channels, seed);

    sevkit::audit::AuditReport report = sevkit::audit::audit_network(net, probe_images, seed);
    write_text_file((fs::path(out_dir) / "audit.txt").string(), report.to_text());
    write_text_file((fs::path(out_dir) / "audit.csv").string(), report.to_csv());
    std::cout << report.to_text();

    if (net.certificate && !report.all_order1) {
        throw AssertionFailure("certificate says equivariant but audit found a non-order1 node");
    }
    return 0;
}

int cmd_sweep(OptionSet& opts) {
    opts.echo("sweep");
    const auto& kv = opts.kv();
    const std::string in_dir = kv.get_or("in", "");
    const std::string out_dir = kv.get_or("out", "out");
    if (in_dir.empty()) throw CLI::ValidationError("sweep", "--in is required");
    if (!kv.get_bool("table4")) {
        throw CLI::ValidationError("sweep", "only --table4 sweeps are defined");
    }
    ensure_dir(out_dir);
    auto corpus = load_corpus(in_dir);

    sevkit::NetworkSpec base;
    base.seed = kv.get_u64("seed");
    sevkit::train::TrainConfig cfg;
    cfg.steps = kv.get_u64("steps");
    cfg.seed = kv.get_u64("seed");
    cfg.patch_size = kv.get_u64("patch");

    auto variants = sevkit::train::table4_variants(base);
    auto rows = sevkit::train::ablation_sweep(variants, cfg,
                                              sevkit::train::EvalGrid::benchmark_default(cfg.seed),
                                              corpus);
    const std::string table = sevkit::train::sweep_to_table(rows);
    write_text_file((fs::path(out_dir) / "sweep.txt").string(), table);
    for (const auto& row : rows) {
        if (!row.diverged) {
            const std::string stem = row.label.substr(1, row.label.find(')') - 1);
            write_text_file((fs::path(out_dir) / ("report_" + stem + ".csv")).string(),
                            row.report.to_csv());
        }
    }
    std::cout << table;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scale-equivariant denoising toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    // Per-subcommand staging: key, CLI option pointer, bound string value.
    struct Binding {
        std::string key;
        CLI::Option* opt;
        std::string* value;
    };

    struct Sub {
        CLI::App* app = nullptr;
        OptionSet opts;
        std::vector<Binding> bindings;
        std::vector<std::unique_ptr<std::string>> storage;
        int (*run)(OptionSet&) = nullptr;
    };
    std::vector<std::unique_ptr<Sub>> subs;

    auto add_sub = [&](const std::string& name, const std::string& desc,
                       int (*run)(OptionSet&),
                       const std::vector<std::pair<std::string, std::string>>& options) {
        auto sub = std::make_unique<Sub>();
        sub->app = app.add_subcommand(name, desc);
        sub->run = run;
        sub->app->add_option("--config", config_path, "key = value config file");
        for (const auto& [key, def] : options) {
            sub->opts.declare(key, def);
            sub->storage.push_back(std::make_unique<std::string>());
            CLI::Option* opt;
            if (def == "true" || def == "false") {
                *sub->storage.back() = "true";  // presence of the flag means true
                opt = sub->app->add_flag("--" + key)->description("default: " + def);
            } else {
                opt = sub->app->add_option("--" + key, *sub->storage.back(), "default: " + def);
            }
            sub->bindings.push_back({key, opt, sub->storage.back().get()});
        }
        subs.push_back(std::move(sub));
    };

    add_sub("gen-noise", "apply a synthetic degradation to a directory of images", cmd_gen_noise,
            {{"in", ""},
             {"out", "out"},
             {"noise", "gaussian"},
             {"sigma", "20"},
             {"alpha", "6"},
             {"base", "gaussian"},
             {"variant", "sincos"},
             {"seed", "1"}});
    add_sub("train", "train a denoiser on a directory of clean images", cmd_train,
            {{"in", ""},
             {"out", "out"},
             {"netspec", ""},
             {"train-config", ""},
             {"steps", "2000"},
             {"seed", "1"}});
    add_sub("denoise", "run a checkpoint over a directory of images", cmd_denoise,
            {{"ckpt", ""}, {"in", ""}, {"out", "out"}});
    add_sub("eval", "evaluate a checkpoint on the noise grid", cmd_eval,
            {{"ckpt", ""}, {"in", ""}, {"grid", ""}, {"out", "out"}, {"seed", "1"}});
    add_sub("audit", "numerically audit homogeneity of a checkpoint", cmd_audit,
            {{"ckpt", ""}, {"out", "out"}, {"probes", "5"}, {"probe-size", "32"}, {"seed", "7"}});
    add_sub("sweep", "train and evaluate the ablation variant table", cmd_sweep,
            {{"in", ""},
             {"out", "out"},
             {"table4", "true"},
             {"steps", "300"},
             {"patch", "64"},
             {"seed", "1"}});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        for (auto& sub : subs) {
            if (!sub->app->parsed()) continue;
            if (!config_path.empty()) sub->opts.load_config(config_path);
            for (const auto& b : sub->bindings) {
                sub->opts.override_from_cli(b.key, b.opt, *b.value);
            }
            return sub->run(sub->opts);
        }
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const AssertionFailure& e) {
        std::cerr << "assertion failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
