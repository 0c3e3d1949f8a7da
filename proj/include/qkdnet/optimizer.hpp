#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

#include "qkdnet/keyrate.hpp"

namespace qkdnet {

class NoFeasiblePoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CostGuardExceeded : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Box for the five free parameters. The intensity boxes are further cut by
/// the ordering constraints mu1 >= mu2 + mu3 + margin and mu2 >= mu3 + margin.
struct ParamBounds {
  Interval q_x{0.01, 0.99};
  Interval p_mu1{0.01, 0.97};
  Interval p_mu2{0.01, 0.97};
  double min_p_mu3 = 0.01;
  double mu_margin = 1e-4;
  double mu_max = 1.0;

  Interval mu1(double mu3) const { return {2.0 * mu3 + 2.0 * mu_margin, mu_max}; }
  Interval mu2(double mu3) const { return {mu3 + mu_margin, mu_max - mu3 - mu_margin}; }
  bool admits(const ProtocolParams& p, double mu3) const;
};

struct OptSettings {
  int grid_points_per_axis = 7;
  int refine_max_iters = 2000;
  double refine_tolerance = 1e-12;
  int plateau_iters = 20;
  ParamBounds bounds;
  std::uint64_t seed = 1;
};

struct OptResult {
  ProtocolParams best;
  KeyRateBreakdown breakdown;
  double objective = 0.0;  // rate per sent pulse before the floor, clamped at 0
  std::uint64_t evaluations = 0;
  bool converged = false;
  bool zero_key_everywhere = false;
};

/// Feasible lattice scan followed by projected Nelder-Mead refinement of the
/// rate per sent pulse. mu3 is fixed at security.mu3.
OptResult optimize(const ChannelInput& channel, const SecurityParams& security,
                   const OptSettings& settings = {});

/// Exhaustive feasibility-filtered lattice maximum; points_per_axis <= 12.
OptResult brute_grid(const ChannelInput& channel, const SecurityParams& security,
                     int points_per_axis, const ParamBounds& bounds = {});

/// Number of lattice points brute_grid would evaluate.
std::uint64_t feasible_lattice_size(const ParamBounds& bounds, double mu3, int points_per_axis);

}  // namespace qkdnet
