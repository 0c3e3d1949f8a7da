#include "qkdnet/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace qkdnet {

namespace {

constexpr int kDims = 5;
constexpr double kSlack = 1e-12;
using Point = std::array<double, kDims>;

ProtocolParams to_params(const Point& x) { return {x[0], x[1], x[2], x[3], x[4]}; }

std::vector<double> axis(Interval iv, int n) {
  if (n == 1) return {0.5 * (iv.lo + iv.hi)};
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = iv.lo + (iv.hi - iv.lo) * i / (n - 1);
  return out;
}

struct Objective {
  const ChannelInput& channel;
  const SecurityParams& security;
  const ParamBounds& bounds;
  std::uint64_t evaluations = 0;

  // Rate per sent pulse before flooring; zero wherever no key survives.
  double operator()(const Point& x) {
    ++evaluations;
    const ProtocolParams p = to_params(x);
    if (!bounds.admits(p, security.mu3)) return 0.0;
    const KeyRateBreakdown b = key_length(channel, p, security);
    if (b.status != KeyStatus::Ok || !(b.ell_raw > 0.0)) return 0.0;
    return b.ell_raw / channel.n_sent;
  }
};

// Projects a simplex proposal onto the feasible set: box first, then the
// probability simplex, then the intensity ordering.
Point project(Point x, const ParamBounds& bounds, double mu3) {
  x[0] = std::clamp(x[0], bounds.q_x.lo, bounds.q_x.hi);
  x[1] = std::clamp(x[1], bounds.p_mu1.lo, bounds.p_mu1.hi);
  x[2] = std::clamp(x[2], bounds.p_mu2.lo, bounds.p_mu2.hi);
  const double room = 1.0 - bounds.min_p_mu3;
  if (x[1] + x[2] > room) {
    const double excess = x[1] + x[2] - room;
    const double share = x[1] / (x[1] + x[2]);
    x[1] = std::max(bounds.p_mu1.lo, x[1] - excess * share);
    x[2] = std::max(bounds.p_mu2.lo, room - x[1]);
  }
  const Interval m1 = bounds.mu1(mu3);
  x[3] = std::clamp(x[3], m1.lo, m1.hi);
  x[4] = std::clamp(x[4], mu3 + bounds.mu_margin, x[3] - mu3 - bounds.mu_margin);
  return x;
}

struct LatticeBest {
  Point point{};
  double value = -1.0;
  bool any_feasible = false;
};

LatticeBest scan_lattice(Objective& f, const ParamBounds& bounds, double mu3, int n) {
  const auto q = axis(bounds.q_x, n);
  const auto p1 = axis(bounds.p_mu1, n);
  const auto p2 = axis(bounds.p_mu2, n);
  const auto m1 = axis(bounds.mu1(mu3), n);
  const auto m2 = axis(bounds.mu2(mu3), n);
  LatticeBest best;
  for (double a : q)
    for (double b : p1)
      for (double c : p2)
        for (double d : m1)
          for (double e : m2) {
            const Point x{a, b, c, d, e};
            if (!bounds.admits(to_params(x), mu3)) continue;
            const double v = f(x);
            if (!best.any_feasible || v > best.value) {
              best = {x, v, true};
            }
          }
  return best;
}

struct RefineOutcome {
  Point point;
  double value;
  bool converged;
};

RefineOutcome nelder_mead(Objective& f, Point start, double start_value, const Point& step,
                          const OptSettings& s, double mu3, std::mt19937_64& rng) {
  std::array<Point, kDims + 1> simplex;
  std::array<double, kDims + 1> value;
  simplex[0] = start;
  value[0] = start_value;
  std::bernoulli_distribution flip(0.5);
  for (int i = 0; i < kDims; ++i) {
    Point x = start;
    x[i] += flip(rng) ? step[i] : -step[i];
    x = project(x, s.bounds, mu3);
    if (x == start) {
      x[i] = start[i] - (flip(rng) ? step[i] : -step[i]);
      x = project(x, s.bounds, mu3);
    }
    simplex[i + 1] = x;
    value[i + 1] = f(x);
  }

  std::array<int, kDims + 1> order;
  double best = *std::max_element(value.begin(), value.end());
  int stale = 0;
  for (int iter = 0; iter < s.refine_max_iters; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return value[a] > value[b]; });
    const int hi = order[0], worst = order[kDims], second = order[kDims - 1];

    Point centroid{};
    for (int i = 0; i < kDims; ++i)
      for (int d = 0; d < kDims; ++d) centroid[d] += simplex[order[i]][d] / kDims;

    auto along = [&](double t) {
      Point x;
      for (int d = 0; d < kDims; ++d) x[d] = centroid[d] + t * (simplex[worst][d] - centroid[d]);
      return project(x, s.bounds, mu3);
    };

    const Point reflected = along(-1.0);
    const double fr = f(reflected);
    if (fr > value[hi]) {
      const Point expanded = along(-2.0);
      const double fe = f(expanded);
      if (fe > fr) {
        simplex[worst] = expanded;
        value[worst] = fe;
      } else {
        simplex[worst] = reflected;
        value[worst] = fr;
      }
    } else if (fr > value[second]) {
      simplex[worst] = reflected;
      value[worst] = fr;
    } else {
      const bool outside = fr > value[worst];
      const Point contracted = along(outside ? -0.5 : 0.5);
      const double fc = f(contracted);
      if (fc > std::max(fr, value[worst]) || (!outside && fc > value[worst])) {
        simplex[worst] = contracted;
        value[worst] = fc;
      } else {
        for (int i = 1; i <= kDims; ++i) {
          const int j = order[i];
          for (int d = 0; d < kDims; ++d)
            simplex[j][d] = simplex[hi][d] + 0.5 * (simplex[j][d] - simplex[hi][d]);
          simplex[j] = project(simplex[j], s.bounds, mu3);
          value[j] = f(simplex[j]);
        }
      }
    }

    const double now = *std::max_element(value.begin(), value.end());
    if (now - best < s.refine_tolerance) {
      if (++stale >= s.plateau_iters) {
        best = std::max(best, now);
        break;
      }
    } else {
      stale = 0;
    }
    best = std::max(best, now);
    if (iter + 1 == s.refine_max_iters) {
      const auto top = std::max_element(value.begin(), value.end()) - value.begin();
      return {simplex[top], value[top], false};
    }
  }
  const auto top = std::max_element(value.begin(), value.end()) - value.begin();
  return {simplex[top], value[top], true};
}

}  // namespace

bool ParamBounds::admits(const ProtocolParams& p, double mu3) const {
  const Interval m1 = mu1(mu3);
  return p.q_x >= q_x.lo - kSlack && p.q_x <= q_x.hi + kSlack && p.p_mu1 >= p_mu1.lo - kSlack &&
         p.p_mu1 <= p_mu1.hi + kSlack && p.p_mu2 >= p_mu2.lo - kSlack &&
         p.p_mu2 <= p_mu2.hi + kSlack && p.p_mu3() >= min_p_mu3 - kSlack &&
         p.mu1 >= m1.lo - kSlack && p.mu1 <= m1.hi + kSlack &&
         p.mu2 >= mu3 + mu_margin - kSlack && p.mu1 >= p.mu2 + mu3 + mu_margin - kSlack &&
         p.feasible(mu3);
}

std::uint64_t feasible_lattice_size(const ParamBounds& bounds, double mu3, int n) {
  std::uint64_t count = 0;
  const auto q = axis(bounds.q_x, n);
  const auto p1 = axis(bounds.p_mu1, n);
  const auto p2 = axis(bounds.p_mu2, n);
  const auto m1 = axis(bounds.mu1(mu3), n);
  const auto m2 = axis(bounds.mu2(mu3), n);
  for (double a : q)
    for (double b : p1)
      for (double c : p2)
        for (double d : m1)
          for (double e : m2)
            if (bounds.admits({a, b, c, d, e}, mu3)) ++count;
  return count;
}

OptResult brute_grid(const ChannelInput& channel, const SecurityParams& security,
                     int points_per_axis, const ParamBounds& bounds) {
  if (points_per_axis < 1 || points_per_axis > 12)
    throw CostGuardExceeded("brute_grid supports 1..12 points per axis");
  channel.validate();
  security.validate();
  Objective f{channel, security, bounds};
  const LatticeBest best = scan_lattice(f, bounds, security.mu3, points_per_axis);
  if (!best.any_feasible) throw NoFeasiblePoint("no feasible lattice point inside the bounds");
  OptResult r;
  r.best = to_params(best.point);
  r.breakdown = key_length(channel, r.best, security);
  r.objective = best.value;
  r.evaluations = f.evaluations;
  r.converged = true;
  r.zero_key_everywhere = best.value <= 0.0;
  return r;
}

OptResult optimize(const ChannelInput& channel, const SecurityParams& security,
                   const OptSettings& settings) {
  channel.validate();
  security.validate();
  if (settings.grid_points_per_axis < 1) throw std::invalid_argument("grid needs >= 1 point per axis");
  const double mu3 = security.mu3;
  Objective f{channel, security, settings.bounds};

  const LatticeBest seed_point = scan_lattice(f, settings.bounds, mu3, settings.grid_points_per_axis);
  if (!seed_point.any_feasible) throw NoFeasiblePoint("no feasible lattice point inside the bounds");

  Point best = seed_point.point;
  double best_value = seed_point.value;
  bool converged = true;

  if (best_value > 0.0) {
    const int n = std::max(settings.grid_points_per_axis - 1, 1);
    const auto& b = settings.bounds;
    Point step{(b.q_x.hi - b.q_x.lo) / n, (b.p_mu1.hi - b.p_mu1.lo) / n,
               (b.p_mu2.hi - b.p_mu2.lo) / n, (b.mu1(mu3).hi - b.mu1(mu3).lo) / n,
               (b.mu2(mu3).hi - b.mu2(mu3).lo) / n};
    for (auto& v : step) v *= 0.5;
    std::mt19937_64 rng(settings.seed);
    // Restart from the incumbent with a shrinking simplex until a restart
    // no longer helps.
    for (int restart = 0; restart < 4; ++restart) {
      const RefineOutcome r = nelder_mead(f, best, best_value, step, settings, mu3, rng);
      converged = r.converged;
      const bool improved = r.value > best_value + settings.refine_tolerance;
      if (r.value > best_value) {
        best = r.point;
        best_value = r.value;
      }
      if (!improved && restart > 0) break;
      for (auto& v : step) v *= 0.25;
    }
  }

  OptResult out;
  out.best = to_params(best);
  out.breakdown = key_length(channel, out.best, security);
  out.objective = std::max(best_value, 0.0);
  out.evaluations = f.evaluations;
  out.converged = converged;
  out.zero_key_everywhere = best_value <= 0.0;
  return out;
}

}  // namespace qkdnet
