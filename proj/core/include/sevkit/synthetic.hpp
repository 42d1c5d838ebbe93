#pragma once

#include <cstdint>
#include <vector>

#include "sevkit/tensor.hpp"

namespace sevkit {

/// Procedural clean images for desk-scale experiments: layered mixes of
/// low-pass filtered noise textures, flat geometric shapes, gradients and
/// sinusoidal gratings, clamped to [0,1]. Deterministic per seed.
std::vector<Tensor> make_synthetic_corpus(std::size_t count, std::size_t h, std::size_t w,
                                          std::size_t channels, std::uint64_t seed);

}  // namespace sevkit
