#pragma once

#include "mfband/core.hpp"
#include "mfband/random.hpp"

#include <cmath>
#include <vector>

namespace fixture {

using namespace mfband;

// Random curve on the grid: smooth-ish sum of a few sinusoids plus noise.
inline MFCurve random_curve(Rng& rng, const Grid& grid, double noise = 0.1) {
  MFCurve c = zeros_like(grid);
  for (std::size_t j = 0; j < grid.dims(); ++j) {
    const double a = rng.normal(), b = rng.normal(), f = rng.uniform(1.0, 6.0);
    for (std::size_t g = 0; g < grid.size(j); ++g) {
      const double t = grid.component(j).points[g];
      c.values[j][g] = a * std::sin(f * t) + b * t + noise * rng.normal();
    }
  }
  return c;
}

// n observations with one scalar covariate w and one functional covariate f.
inline Dataset random_dataset(std::uint64_t seed, std::size_t n, const Grid& grid) {
  Rng rng(seed);
  Dataset d;
  d.grid = grid;
  d.layout = CovariateLayout{{"w"}, {"f"}};
  for (std::size_t i = 0; i < n; ++i) {
    Covariates x;
    x.scalar = {rng.uniform()};
    x.functional = {random_curve(rng, grid)};
    MFCurve y = random_curve(rng, grid);
    for (std::size_t j = 0; j < grid.dims(); ++j)
      for (std::size_t g = 0; g < grid.size(j); ++g)
        y.values[j][g] += 2.0 * x.scalar[0] - 0.5 * x.functional[0].values[j][g];
    d.x.push_back(std::move(x));
    d.y.push_back(std::move(y));
  }
  return d;
}

inline std::vector<std::size_t> range(std::size_t a, std::size_t b) {
  std::vector<std::size_t> v;
  for (std::size_t i = a; i < b; ++i) v.push_back(i);
  return v;
}

}  // namespace fixture
