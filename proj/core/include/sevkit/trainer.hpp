#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sevkit/metrics.hpp"
#include "sevkit/network.hpp"
#include "sevkit/noise.hpp"
#include "sevkit/tensor.hpp"

namespace sevkit::train {

enum class Loss { l1, l2 };

struct TrainConfig {
    std::size_t patch_size = 64;  // desk scale; must be divisible by 2^depth
    std::size_t batch_size = 4;
    std::size_t steps = 2000;
    float lr_initial = 2e-4f;
    float lr_decay_factor = 0.5f;
    std::size_t lr_decay_every = 0;  // 0: decay at each fifth of the run
    float adam_beta1 = 0.9f;
    float adam_beta2 = 0.999f;
    float adam_eps = 1e-8f;
    bool augment_flips = true;
    bool augment_rotations = true;
    Loss loss = Loss::l1;
    double sigma_min = 5.0;
    double sigma_max = 20.0;
    std::uint64_t seed = 1;

    void validate() const;
    std::string to_text() const;
    static TrainConfig from_text(const std::string& text);
};

/// Adam with bias correction; one moment pair per parameter tensor.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t t = 0;

    static AdamState init(const std::vector<ParamRef<float>>& params);
};

void adam_step(std::vector<ParamRef<float>>& params, AdamState& state, float lr, float beta1,
               float beta2, float eps);

struct StepRecord {
    std::size_t step;
    float lr;
    double loss;
};

/// Resumable optimizer snapshot (sidecar to the network checkpoint).
struct TrainState {
    AdamState opt;
    std::uint64_t next_step = 0;
};

struct TrainResult {
    Network net;
    std::vector<StepRecord> curve;
    bool diverged = false;
    std::size_t divergence_step = 0;  // valid when diverged
    bool expected_unstable = false;
    TrainState final_state;
};

void save_train_state(const TrainState& state, const std::string& path);
TrainState load_train_state(const std::string& path);

/// Supervised denoising at desk scale. Patches are sampled and degraded with
/// seeds derived from (config seed, step), and the decay schedule is planned
/// from cfg.steps, so loss curves are bit-reproducible and a mid-run
/// checkpoint resumes to the identical next step. Divergence (non-finite
/// loss) is recorded with its step index, not thrown. `stop_after` > 0 halts
/// early (mid-run snapshot) without changing the schedule.
TrainResult train(const NetworkSpec& spec, const TrainConfig& cfg,
                  const std::vector<Tensor>& corpus, std::size_t stop_after = 0);

/// Continue a run from step `state.next_step` with existing parameters.
TrainResult train_resume(Network net, TrainState state, const TrainConfig& cfg,
                         const std::vector<Tensor>& corpus);

std::string curve_to_csv(const std::vector<StepRecord>& curve);

// ---------------------------------------------------------------------------
// Evaluation protocol

struct EvalRow {
    std::string label;
    noise::NoiseSpec spec;
};

/// The evaluation grid mirrors the benchmark columns: in-distribution
/// Gaussian, speckle at three levels, Poisson at three levels, the mixture,
/// the three spatial level-map variants, and the Laplace-base extension.
struct EvalGrid {
    std::vector<EvalRow> rows;

    static EvalGrid benchmark_default(std::uint64_t seed);
    std::string to_text() const;
    static EvalGrid from_text(const std::string& text);
};

/// Denoise every corpus image under every grid row; PSNR/SSIM against the
/// clean originals. Images are reflect-padded to the network multiple and
/// cropped back. Averaged speckle/poisson summary rows are appended when all
/// three levels are present.
metrics::MetricReport evaluate(const Network& net, const EvalGrid& grid,
                               const std::vector<Tensor>& corpus);

/// Mean in-distribution PSNR minus mean out-of-distribution PSNR (positive =
/// degradation). Both reports must come from the same corpus.
double ood_gap(const metrics::MetricReport& report_id, const metrics::MetricReport& report_ood);

struct SweepRow {
    std::string label;
    NetworkSpec spec;
    metrics::MetricReport report;
    bool diverged = false;
    std::size_t divergence_step = 0;
    bool expected_unstable = false;
    bool all_order1 = false;   // audit verdict column
    double end_to_end_slope = 0.0;
};

/// Trains each variant under the identical config and corpus, evaluates on
/// the grid, and audits each trained net. Divergent runs keep their row with
/// the divergence step recorded.
std::vector<SweepRow> ablation_sweep(const std::vector<std::pair<std::string, NetworkSpec>>& variants,
                                     const TrainConfig& cfg, const EvalGrid& grid,
                                     const std::vector<Tensor>& corpus);

/// The comparison variant list in table order: (1a)-(1h), (2a)-(2f), plus the
/// second-order gating configuration flagged expected-unstable.
std::vector<std::pair<std::string, NetworkSpec>> table4_variants(const NetworkSpec& base);

std::string sweep_to_table(const std::vector<SweepRow>& rows);

}  // namespace sevkit::train
