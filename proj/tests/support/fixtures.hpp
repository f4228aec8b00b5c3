#pragma once

#include <vector>

#include "polytraj/dataset.hpp"
#include "polytraj/rng.hpp"
#include "polytraj/sample.hpp"
#include "polytraj/synthetic.hpp"

namespace polytraj::testing {

/// Samples from noiseless synthetic scenes with `future` frames after t0.
inline std::vector<Sample> synthetic_samples(data::SyntheticKind kind, int n, std::size_t history, int future,
                                             std::uint64_t seed = 1, int neighbors = 2) {
  data::SyntheticParams p;
  p.frames = static_cast<int>(history) + future + 1;
  p.neighbors = neighbors;
  Rng rng(seed);
  std::vector<Sample> out;
  for (const auto& s : data::gen_synthetic(kind, p, n, rng)) out.push_back(data::make_sample(s, history));
  return out;
}

}  // namespace polytraj::testing
