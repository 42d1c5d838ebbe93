#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sevkit/network.hpp"
#include "sevkit/noise.hpp"
#include "sevkit/tensor.hpp"

namespace sevkit::audit {

/// Probes run in double precision so that architectural violations are
/// separated from float32 round-off.
using ProbeFn = std::function<TensorD(const TensorD&)>;

inline constexpr double kDefaultScales[] = {1e-2, 1e-1, 1.0, 10.0, 100.0};
inline constexpr double kSlopeTolerance = 0.01;
inline constexpr double kResidualTolerance = 1e-4;

enum class Verdict { order0, order1, order2, non_homogeneous };
std::string to_string(Verdict v);

struct OrderEstimate {
    double slope = 0.0;
    double r2 = 0.0;
};

/// Least-squares slope of log ||fn(k*x)||_2 against log k. Requires >= 4
/// scales spanning at least two decades; a zero output norm at any probe is
/// an "unobservable at this input" error.
OrderEstimate estimate_order(const ProbeFn& fn, const TensorD& input,
                             std::span<const double> scales);

/// max_e |fn(k*x)_e - k*fn(x)_e| / (|k*fn(x)_e| + 1e-8).
double equivariance_residual(const ProbeFn& fn, const TensorD& input, double k);

/// Same form for order p: deviation of fn(k*x) from k^p * fn(x).
double order_residual(const ProbeFn& fn, const TensorD& input, double k, int order);

struct NodeAudit {
    std::string name;
    double slope = 0.0;
    double r2 = 0.0;
    double max_residual = 0.0;  // residual at the fitted integer order
    Verdict verdict = Verdict::non_homogeneous;
    bool stable = true;  // same verdict across all probe inputs
};

/// Fit the order on one input and attach the residual-checked verdict.
/// order-p verdicts require |slope - p| <= 0.01 and residual <= 1e-4.
NodeAudit classify(const std::string& name, const ProbeFn& fn, const TensorD& input,
                   std::span<const double> scales = kDefaultScales);

/// Relative L2 residual between G(Z + L.*N) and L .* G(Z/L + N) on centered
/// inputs, with L broadcast over channels. A constant L reduces to the
/// first-order homogeneity identity and must vanish on certified nets; a
/// spatially varying L is measured and reported, never asserted.
double decoupling_probe(const NetworkT<double>& net, const TensorD& clean,
                        const TensorD& level_map, std::uint64_t base_noise_seed);

struct DecouplingEntry {
    std::string map_desc;
    double residual = 0.0;
    bool asserted = false;  // true only for constant maps
};

struct AuditReport {
    std::vector<NodeAudit> nodes;
    std::vector<DecouplingEntry> decoupling;
    bool all_order1 = false;
    bool network_certificate = false;

    std::string to_text() const;
    /// CSV schema: node,slope,r2,max_residual,verdict,stable.
    std::string to_csv() const;
};

/// Per-node homogeneity audit of a network plus end-to-end and decoupling
/// probes. Probe inputs are images in [0,1]; per-node feature probes are
/// synthesized internally with seeded draws. Requires a non-empty input set.
AuditReport audit_network(const Network& net, const std::vector<Tensor>& probe_images,
                          std::uint64_t seed = 7);

}  // namespace sevkit::audit
