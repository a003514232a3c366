#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "coinforge/diffusion.hpp"
#include "coinforge/random.hpp"

namespace coinforge {

// First-order discretized endpoint samples of the same diffusion; the
// approximate baseline the exact sampler is tested against. The requested
// step is rounded down so the horizon splits evenly.
inline std::vector<double> euler_maruyama_reference(const DiffusionSpec& spec,
                                                    double step, std::size_t n_paths,
                                                    UniformSource& src) {
  if (!(step > 0.0))
    throw std::invalid_argument("euler_maruyama_reference: step must be positive");
  const auto n_steps =
      static_cast<std::size_t>(std::ceil(spec.horizon / step - 1e-12));
  const double dt = spec.horizon / static_cast<double>(n_steps);
  const double sq = std::sqrt(dt);
  std::vector<double> out;
  out.reserve(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) {
    double x = spec.start;
    for (std::size_t s = 0; s < n_steps; ++s)
      x += spec.drift(x) * dt + sq * normal_draw(src);
    out.push_back(x);
  }
  return out;
}

}  // namespace coinforge
