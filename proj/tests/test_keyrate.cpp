#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle/keyrate_oracle.hpp"
#include "qkdnet/keyrate.hpp"

using namespace qkdnet;

namespace {

bool close(double got, const oracle::Real& want, double rel) {
  const double w = want.convert_to<double>();
  if (w == 0.0) return got == 0.0;
  return std::abs(got - w) <= rel * std::abs(w);
}

oracle::Inputs to_oracle(const ChannelInput& c, const ProtocolParams& p, const SecurityParams& s) {
  oracle::Inputs in;
  in.n = c.n_routed;
  in.n0 = c.n_sent;
  in.eta = c.eta_tot;
  in.q_x = p.q_x;
  in.p1 = p.p_mu1;
  in.p2 = p.p_mu2;
  in.mu1 = p.mu1;
  in.mu2 = p.mu2;
  in.f_ec = s.f_ec;
  in.eps_cor = s.eps_cor;
  in.eps_sec = s.eps_sec;
  in.p_dc = s.p_dc;
  in.eta_bob = s.eta_bob;
  in.e_mis = s.e_mis;
  in.mu3 = s.mu3;
  in.eta_bob_in_errors = s.eta_bob_in_error_model;
  return in;
}

const ChannelInput kReference{3.75e10, 3.75e10, 0.2512};
const ProtocolParams kParams{0.7, 0.6, 0.3, 0.5, 0.1};

}  // namespace

TEST_CASE("tau reduces to the vacuum and Poisson cases") {
  SecurityParams s;
  s.mu3 = 0.0;
  ProtocolParams zero{0.5, 0.4, 0.4, 0.0, 0.0};
  CHECK(tau(0, zero, s) == doctest::Approx(1.0));
  CHECK(tau(3, zero, s) == 0.0);

  ProtocolParams single{0.5, 1.0 - 1e-300, 0.0, 0.7, 0.0};
  for (int n = 0; n < 6; ++n)
    CHECK(tau(n, single, s) == doctest::Approx(std::exp(-0.7) * std::pow(0.7, n) / std::tgamma(n + 1.0)));
}

TEST_CASE("tau matches the oracle on a three-intensity mixture") {
  SecurityParams s;
  const ProtocolParams p{0.5, 0.7, 0.2, 0.5, 0.1};
  oracle::Inputs in = to_oracle(kReference, p, s);
  const auto o = oracle::evaluate(in);
  CHECK(close(tau(0, p, s), o.tau0, 1e-12));
  CHECK(close(tau(1, p, s), o.tau1, 1e-12));
}

TEST_CASE("dark and vacuum channels click nowhere") {
  SecurityParams s;
  s.p_dc = 0.0;
  CHECK(detection_count(Basis::X, Intensity::Mu1, {1e10, 1e10, 0.0}, kParams, s) == 0.0);
  s.mu3 = 0.0;
  CHECK(detection_count(Basis::X, Intensity::Mu3, {1e10, 1e10, 0.3}, kParams, s) == 0.0);
}

TEST_CASE("detection count on the reference channel") {
  const SecurityParams s;
  const ProtocolParams p{0.7, 0.7, 0.2, 0.5, 0.1};
  const ChannelInput c{1e10, 1e10, 0.2512};
  const auto o = oracle::evaluate(to_oracle(c, p, s));
  CHECK(close(detection_count(Basis::X, Intensity::Mu1, c, p, s), o.n_x_k[0], 1e-12));
}

TEST_CASE("finite size bound") {
  const SecurityParams s;
  CHECK(finite_size_bound(0, 0, 0.3, 0.5, BoundSign::Lower, s) == 0.0);
  const double delta = std::sqrt(3e6 / 2 * std::log(21 / 1e-10));
  CHECK(finite_size_bound(1e6, 3e6, 0.1, 0.3, BoundSign::Upper, s) ==
        doctest::Approx(std::exp(0.1) / 0.3 * (1e6 + delta)).epsilon(1e-14));
  CHECK(finite_size_bound(1.0, 1e6, 0.1, 0.3, BoundSign::Lower, s) < 0.0);
}

TEST_CASE("bound guards") {
  SecurityParams s;
  ProtocolParams p = kParams;
  p.mu2 = s.mu3;
  CHECK_THROWS_AS(s0_bound(Basis::X, kReference, p, s), DegenerateIntensities);
  CHECK_THROWS_AS(vz1_bound(kReference, p, s), DegenerateIntensities);
  p = kParams;
  p.mu1 = p.mu2 + s.mu3;
  CHECK_THROWS_AS(s1_bound(Basis::X, kReference, p, s, 0.0), ConstraintViolated);
  CHECK_THROWS_AS(key_length(kReference, p, s), ConstraintViolated);
}

TEST_CASE("noiseless vacuum limit") {
  SecurityParams s;
  s.p_dc = 0.0;
  s.e_mis = 0.0;
  s.mu3 = 0.0;
  CHECK(s0_bound(Basis::X, kReference, kParams, s).clamped == 0.0);
  const Bound v = vz1_bound(kReference, kParams, s);
  CHECK(v.clamped == 0.0);
  CHECK(v.raw == 0.0);  // no errors, so no finite-size residual either
}

TEST_CASE("gamma term") {
  CHECK_THROWS_AS(gamma_term(1e-10, 0.0, 1e5, 1e5), DomainError);
  CHECK_THROWS_AS(gamma_term(1e-10, 1.0, 1e5, 1e5), DomainError);
  const double g = gamma_term(1e-10, 0.01, 1e5, 1e5);
  const oracle::Real want = oracle::gamma_fn(1e-10, 0.01, 1e5, 1e5);
  CHECK(close(g, want, 1e-12));
  CHECK(gamma_term(1e-10, 1e-9, 1e5, 1e5) < gamma_term(1e-10, 1e-3, 1e5, 1e5));
}

TEST_CASE("phase error") {
  const SecurityParams s;
  CHECK_THROWS_AS(phase_error(0.0, 1e6, 0.0, s), InsufficientStatistics);
  const auto phi = phase_error(1e12, 1e12, 0.0, s);
  CHECK(phi.capped >= 0.0);
  CHECK(phi.capped < 1e-3);
  CHECK(phase_error(1e3, 1e3, 900, s).capped == 0.5);
}

TEST_CASE("noise dominated channel yields no key") {
  const SecurityParams s;
  const auto b = key_length({1e10, 1e10, 1e-9}, kParams, s);
  CHECK(b.e_obs > 0.4);
  CHECK(b.ell == 0.0);
}

TEST_CASE("rate per sent equals rate per routed without discarding") {
  const SecurityParams s;
  const auto b = key_length(kReference, kParams, s);
  REQUIRE(b.status == KeyStatus::Ok);
  CHECK(b.ell > 0.0);
  CHECK(b.rate_per_sent == b.rate_per_routed);
}

TEST_CASE("eta_bob in the error model lowers the error count") {
  SecurityParams s;
  const double plain = error_count(Basis::Z, Intensity::Mu1, kReference, kParams, s);
  s.eta_bob_in_error_model = true;
  const double scaled = error_count(Basis::Z, Intensity::Mu1, kReference, kParams, s);
  CHECK(scaled < plain);
}

TEST_CASE("reference channel pipeline matches the oracle") {
  const SecurityParams s;
  const auto b = key_length(kReference, kParams, s);
  const auto o = oracle::evaluate(to_oracle(kReference, kParams, s));
  CHECK(close(b.s_x0.clamped, o.s_x0, 1e-9));
  CHECK(close(b.s_x1.clamped, o.s_x1, 1e-9));
  CHECK(close(b.v_z1.clamped, o.v_z1, 1e-9));
  CHECK(close(b.phi_x.capped, o.phi, 1e-9));
  CHECK(close(b.ell_raw, o.ell_raw, 1e-9));
}

TEST_CASE("random draws match the oracle") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int attempt = 0; checked < 100 && attempt < 10000; ++attempt) {
    SecurityParams s;
    s.eta_bob_in_error_model = u(rng) < 0.2;
    ProtocolParams p;
    p.q_x = 0.5 + 0.45 * u(rng);
    p.p_mu1 = 0.1 + 0.7 * u(rng);
    p.p_mu2 = 0.05 + (0.95 - p.p_mu1 - 0.05) * u(rng);
    p.mu1 = 0.2 + 0.7 * u(rng);
    p.mu2 = 0.01 + (p.mu1 / 2 - 0.01) * u(rng);
    ChannelInput c;
    c.n_routed = std::pow(10.0, 8 + 4 * u(rng));
    c.n_sent = c.n_routed * (1 + 2 * u(rng));
    c.eta_tot = std::pow(10.0, -3 * u(rng));
    if (!p.feasible(s.mu3)) continue;
    const auto b = key_length(c, p, s);
    if (b.status != KeyStatus::Ok) continue;
    ++checked;
    const auto o = oracle::evaluate(to_oracle(c, p, s));
    INFO("draw " << checked << " N=" << c.n_routed << " eta=" << c.eta_tot);
    CHECK(close(b.n_x, o.n_x, 1e-9));
    CHECK(close(b.n_z, o.n_z, 1e-9));
    CHECK(close(b.m_x, o.m_x, 1e-9));
    CHECK(close(b.m_z, o.m_z, 1e-9));
    for (int k = 0; k < 3; ++k) {
      CHECK(close(b.n_x_k[k], o.n_x_k[k], 1e-9));
      CHECK(close(b.n_z_k[k], o.n_z_k[k], 1e-9));
      CHECK(close(b.m_z_k[k], o.m_z_k[k], 1e-9));
    }
    CHECK(close(b.s_x0.raw, o.s_x0_raw, 1e-9));
    CHECK(close(b.s_x0.clamped, o.s_x0, 1e-9));
    CHECK(close(b.s_x1.raw, o.s_x1_raw, 1e-9));
    CHECK(close(b.s_x1.clamped, o.s_x1, 1e-9));
    CHECK(close(b.s_z0.clamped, o.s_z0, 1e-9));
    CHECK(close(b.s_z1.clamped, o.s_z1, 1e-9));
    CHECK(close(b.v_z1.raw, o.v_z1_raw, 1e-9));
    CHECK(close(b.v_z1.clamped, o.v_z1, 1e-9));
    CHECK(close(b.phi_x.raw, o.phi_raw, 1e-9));
    CHECK(close(b.phi_x.capped, o.phi, 1e-9));
    CHECK(close(b.e_obs, o.e_obs, 1e-9));
    CHECK(close(b.ell_raw, o.ell_raw, 1e-9));
  }
  CHECK(checked == 100);
}

TEST_CASE("security json overrides only the given fields") {
  const auto s = security_from_json({{"e_mis", 0.01}});
  CHECK(s.e_mis == 0.01);
  CHECK(s.f_ec == 1.16);
  CHECK(to_json(s)["e_mis"] == 0.01);
}
