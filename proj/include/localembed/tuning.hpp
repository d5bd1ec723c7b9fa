#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "localembed/io.hpp"
#include "localembed/pipeline.hpp"

namespace localembed {

struct GridSpec {
  std::vector<double> lambda{0.1, 1.0};
  std::vector<double> mu{0.0, 0.1};
  std::vector<std::size_t> k_nn{5, 10, 20};
  std::vector<std::size_t> n_bar{10, 25};
};

struct GridPoint {
  double lambda = 0.0;
  double mu = 0.0;
  std::size_t k_nn = 0;
  std::size_t n_bar = 0;
  double p_at_1 = 0.0;
  double p_at_3 = 0.0;
  double p_at_5 = 0.0;
};

struct GridResult {
  HyperParams best;
  std::vector<GridPoint> table;
};

/// Holds out `valid_fraction` of `train` (seeded), evaluates every grid point
/// on it and returns the hyper-parameters with the highest validation P@1
/// (first in grid order on ties). SVP embeddings are computed once per n_bar.
GridResult grid_search(const Dataset& train, const GridSpec& grid, const HyperParams& base, std::uint64_t seed,
                       double valid_fraction = 0.2);

}  // namespace localembed
