#include "qkdnet/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qkdnet {

namespace {

constexpr std::array<Intensity, 3> kIntensities = {Intensity::Mu1, Intensity::Mu2, Intensity::Mu3};

double basis_sift(Basis basis, const ProtocolParams& p) {
  const double q = basis == Basis::X ? p.q_x : 1.0 - p.q_x;
  return q * q;
}

double clamp_count(double v, double parent) { return std::clamp(v, 0.0, std::max(parent, 0.0)); }

double epsilon_log(const SecurityParams& s) { return std::log(21.0 / s.eps_sec); }

// Counts of one basis, indexed by intensity, plus their total.
struct Counts {
  std::array<double, 3> k{};
  double total = 0.0;
};

Counts detections(Basis b, const ChannelInput& c, const ProtocolParams& p, const SecurityParams& s) {
  Counts out;
  for (auto k : kIntensities) {
    out.k[static_cast<int>(k)] = detection_count(b, k, c, p, s);
    out.total += out.k[static_cast<int>(k)];
  }
  return out;
}

Counts errors(Basis b, const ChannelInput& c, const ProtocolParams& p, const SecurityParams& s) {
  Counts out;
  for (auto k : kIntensities) {
    out.k[static_cast<int>(k)] = error_count(b, k, c, p, s);
    out.total += out.k[static_cast<int>(k)];
  }
  return out;
}

double corrected(const Counts& c, Intensity k, BoundSign sign, const ProtocolParams& p,
                 const SecurityParams& s) {
  return finite_size_bound(c.k[static_cast<int>(k)], c.total, intensity_value(k, p, s),
                           intensity_probability(k, p), sign, s);
}

Bound vacuum_bound(const Counts& n, const ProtocolParams& p, const SecurityParams& s) {
  const double mu2 = p.mu2, mu3 = s.mu3;
  if (mu2 == mu3) throw DegenerateIntensities("mu2 and mu3 must differ");
  const double raw = tau(0, p, s) *
                     (mu2 * corrected(n, Intensity::Mu3, BoundSign::Lower, p, s) -
                      mu3 * corrected(n, Intensity::Mu2, BoundSign::Upper, p, s)) /
                     (mu2 - mu3);
  return {raw, clamp_count(raw, n.total)};
}

Bound single_photon_bound(const Counts& n, const ProtocolParams& p, const SecurityParams& s,
                          double s0) {
  const double mu1 = p.mu1, mu2 = p.mu2, mu3 = s.mu3;
  const double denom = mu1 * (mu2 - mu3) - mu2 * mu2 + mu3 * mu3;
  if (!(denom > 0.0))
    throw ConstraintViolated("single-photon bound needs mu1 > mu2 + mu3 and mu2 > mu3");
  const double tau0 = tau(0, p, s);
  const double inner = corrected(n, Intensity::Mu2, BoundSign::Lower, p, s) -
                       corrected(n, Intensity::Mu3, BoundSign::Upper, p, s) -
                       (mu2 * mu2 - mu3 * mu3) / (mu1 * mu1) *
                           (corrected(n, Intensity::Mu1, BoundSign::Upper, p, s) - s0 / tau0);
  const double raw = tau(1, p, s) * mu1 * inner / denom;
  return {raw, clamp_count(raw, n.total)};
}

}  // namespace

void SecurityParams::validate() const {
  if (!(f_ec >= 1.0)) throw ConstraintViolated("f_ec must be >= 1");
  if (!(eps_cor > 0.0 && eps_cor < 1.0)) throw ConstraintViolated("eps_cor must be in (0, 1)");
  if (!(eps_sec > 0.0 && eps_sec < 1.0)) throw ConstraintViolated("eps_sec must be in (0, 1)");
  if (!(p_dc >= 0.0 && p_dc < 1.0)) throw ConstraintViolated("p_dc must be in [0, 1)");
  if (!(eta_bob > 0.0 && eta_bob <= 1.0)) throw ConstraintViolated("eta_bob must be in (0, 1]");
  if (!(e_mis >= 0.0 && e_mis < 0.5)) throw ConstraintViolated("e_mis must be in [0, 0.5)");
  if (!(mu3 >= 0.0)) throw ConstraintViolated("mu3 must be >= 0");
}

bool ProtocolParams::feasible(double mu3) const {
  return q_x > 0.0 && q_x < 1.0 && p_mu1 > 0.0 && p_mu2 > 0.0 && p_mu3() > 0.0 && mu3 >= 0.0 &&
         mu2 > mu3 && mu1 > mu2 + mu3;
}

void ProtocolParams::validate(double mu3) const {
  if (!(q_x > 0.0 && q_x < 1.0)) throw ConstraintViolated("q_x must be in (0, 1)");
  if (!(p_mu1 > 0.0 && p_mu2 > 0.0 && p_mu3() > 0.0))
    throw ConstraintViolated("intensity probabilities must be positive and sum to 1");
  if (!(mu3 >= 0.0 && mu2 > mu3)) throw ConstraintViolated("need mu2 > mu3 >= 0");
  if (!(mu1 > mu2 + mu3)) throw ConstraintViolated("need mu1 > mu2 + mu3");
}

void ChannelInput::validate() const {
  if (!(n_routed > 0.0 && n_routed <= n_sent))
    throw ConstraintViolated("need 0 < N <= N0 for the channel");
  if (!(eta_tot > 0.0 && eta_tot <= 1.0)) throw ConstraintViolated("eta_tot must be in (0, 1]");
}

double intensity_value(Intensity k, const ProtocolParams& p, const SecurityParams& s) {
  switch (k) {
    case Intensity::Mu1: return p.mu1;
    case Intensity::Mu2: return p.mu2;
    case Intensity::Mu3: return s.mu3;
  }
  return 0.0;
}

double intensity_probability(Intensity k, const ProtocolParams& p) {
  switch (k) {
    case Intensity::Mu1: return p.p_mu1;
    case Intensity::Mu2: return p.p_mu2;
    case Intensity::Mu3: return p.p_mu3();
  }
  return 0.0;
}

double binary_entropy(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double tau(int n, const ProtocolParams& protocol, const SecurityParams& security) {
  if (n < 0) throw std::invalid_argument("photon number must be non-negative");
  const double log_factorial = std::lgamma(static_cast<double>(n) + 1.0);
  double total = 0.0;
  for (auto k : kIntensities) {
    const double mu = intensity_value(k, protocol, security);
    const double pk = intensity_probability(k, protocol);
    if (mu == 0.0) {
      if (n == 0) total += pk;
      continue;
    }
    total += pk * std::exp(-mu + n * std::log(mu) - log_factorial);
  }
  return total;
}

double detection_count(Basis basis, Intensity k, const ChannelInput& channel,
                       const ProtocolParams& protocol, const SecurityParams& security) {
  const double mu = intensity_value(k, protocol, security);
  // 1 - (1 - 2 p_dc) e^{-x}, rearranged to avoid cancellation for tiny x
  const double x = channel.eta_tot * security.eta_bob * mu;
  const double click = -std::expm1(-x) + 2.0 * security.p_dc * std::exp(-x);
  return channel.n_routed * basis_sift(basis, protocol) * intensity_probability(k, protocol) * click;
}

double error_count(Basis basis, Intensity k, const ChannelInput& channel,
                   const ProtocolParams& protocol, const SecurityParams& security) {
  const double mu = intensity_value(k, protocol, security);
  const double eta =
      security.eta_bob_in_error_model ? channel.eta_tot * security.eta_bob : channel.eta_tot;
  const double err = security.p_dc + security.e_mis * -std::expm1(-eta * mu);
  return channel.n_routed * basis_sift(basis, protocol) * intensity_probability(k, protocol) * err;
}

double finite_size_bound(double count, double total, double k, double p_k, BoundSign sign,
                         const SecurityParams& security) {
  const double delta = std::sqrt(total / 2.0 * epsilon_log(security));
  return std::exp(k) / p_k * (sign == BoundSign::Upper ? count + delta : count - delta);
}

Bound s0_bound(Basis basis, const ChannelInput& channel, const ProtocolParams& protocol,
               const SecurityParams& security) {
  return vacuum_bound(detections(basis, channel, protocol, security), protocol, security);
}

Bound s1_bound(Basis basis, const ChannelInput& channel, const ProtocolParams& protocol,
               const SecurityParams& security, double s0) {
  return single_photon_bound(detections(basis, channel, protocol, security), protocol, security,
                             s0);
}

Bound vz1_bound(const ChannelInput& channel, const ProtocolParams& protocol,
                const SecurityParams& security) {
  if (protocol.mu2 == security.mu3) throw DegenerateIntensities("mu2 and mu3 must differ");
  const Counts m = errors(Basis::Z, channel, protocol, security);
  const double raw = tau(1, protocol, security) *
                     (corrected(m, Intensity::Mu2, BoundSign::Upper, protocol, security) -
                      corrected(m, Intensity::Mu3, BoundSign::Lower, protocol, security)) /
                     (protocol.mu2 - security.mu3);
  return {raw, clamp_count(raw, m.total)};
}

double gamma_term(double a, double b, double c, double d) {
  if (!(b > 0.0 && b < 1.0)) throw DomainError("gamma: b must lie in (0, 1)");
  if (!(c > 0.0 && d > 0.0)) throw DomainError("gamma: c and d must be positive");
  if (!(a > 0.0)) throw DomainError("gamma: a must be positive");
  const double spread = (c + d) * (1.0 - b) * b / (c * d);
  const double log_arg = (c + d) / (c * d * (1.0 - b) * b) * (21.0 * 21.0) / (a * a);
  const double radicand = spread / std::numbers::ln2 * std::log2(log_arg);
  if (!(radicand >= 0.0)) throw DomainError("gamma: negative radicand");
  return std::sqrt(radicand);
}

PhaseErrorBound phase_error(double s_z1, double s_x1, double v_z1, const SecurityParams& security) {
  if (!(s_z1 > 0.0) || !(s_x1 > 0.0))
    throw InsufficientStatistics("no single-photon events to bound the phase error");
  const double b = v_z1 / s_z1;
  PhaseErrorBound out;
  if (b <= 0.0) {
    // b -> 0+ limit of b + gamma(.., b, ..) is 0.
    out.raw = 0.0;
  } else if (b >= 1.0) {
    out.raw = b;
  } else {
    out.raw = b + gamma_term(security.eps_sec, b, s_z1, s_x1);
  }
  out.capped = std::clamp(out.raw, 0.0, 0.5);
  return out;
}

const char* to_string(KeyStatus s) {
  switch (s) {
    case KeyStatus::Ok: return "ok";
    case KeyStatus::InsufficientStatistics: return "insufficient_statistics";
    case KeyStatus::DomainError: return "domain_error";
  }
  return "?";
}

KeyRateBreakdown key_length(const ChannelInput& channel, const ProtocolParams& protocol,
                            const SecurityParams& security) {
  protocol.validate(security.mu3);
  KeyRateBreakdown b;

  const Counts nx = detections(Basis::X, channel, protocol, security);
  const Counts nz = detections(Basis::Z, channel, protocol, security);
  const Counts mx = errors(Basis::X, channel, protocol, security);
  const Counts mz = errors(Basis::Z, channel, protocol, security);
  b.n_x = nx.total;
  b.n_z = nz.total;
  b.m_x = mx.total;
  b.m_z = mz.total;
  b.n_x_k = nx.k;
  b.n_z_k = nz.k;
  b.m_x_k = mx.k;
  b.m_z_k = mz.k;

  b.s_x0 = vacuum_bound(nx, protocol, security);
  b.s_x1 = single_photon_bound(nx, protocol, security, b.s_x0.clamped);
  b.s_z0 = vacuum_bound(nz, protocol, security);
  b.s_z1 = single_photon_bound(nz, protocol, security, b.s_z0.clamped);
  b.v_z1 = vz1_bound(channel, protocol, security);
  b.e_obs = b.n_x > 0.0 ? b.m_x / b.n_x : 0.0;

  try {
    b.phi_x = phase_error(b.s_z1.clamped, b.s_x1.clamped, b.v_z1.clamped, security);
  } catch (const InsufficientStatistics&) {
    b.status = KeyStatus::InsufficientStatistics;
    return b;
  } catch (const DomainError&) {
    b.status = KeyStatus::DomainError;
    return b;
  }

  b.ell_raw = b.s_x0.clamped + b.s_x1.clamped - b.s_x1.clamped * binary_entropy(b.phi_x.capped) -
              b.n_x * security.f_ec * binary_entropy(b.e_obs) -
              6.0 * std::log2(21.0 / security.eps_sec) - std::log2(2.0 / security.eps_cor);
  b.ell = std::max(0.0, std::floor(b.ell_raw));
  b.rate_per_routed = channel.n_routed > 0.0 ? b.ell / channel.n_routed : 0.0;
  b.rate_per_sent = channel.n_sent > 0.0 ? b.ell / channel.n_sent : 0.0;
  return b;
}

nlohmann::json to_json(const SecurityParams& s) {
  return {{"f_ec", s.f_ec},       {"eps_cor", s.eps_cor}, {"eps_sec", s.eps_sec},
          {"p_dc", s.p_dc},       {"eta_bob", s.eta_bob}, {"e_mis", s.e_mis},
          {"mu3", s.mu3},         {"eta_bob_in_error_model", s.eta_bob_in_error_model}};
}

nlohmann::json to_json(const ProtocolParams& p) {
  return {{"q_x", p.q_x}, {"p_mu1", p.p_mu1}, {"p_mu2", p.p_mu2}, {"p_mu3", p.p_mu3()},
          {"mu1", p.mu1}, {"mu2", p.mu2}};
}

nlohmann::json to_json(const KeyRateBreakdown& b) {
  auto bound = [](const Bound& x) { return nlohmann::json{{"raw", x.raw}, {"clamped", x.clamped}}; };
  return {{"n_x", b.n_x},
          {"n_z", b.n_z},
          {"m_x", b.m_x},
          {"m_z", b.m_z},
          {"s_x0", bound(b.s_x0)},
          {"s_x1", bound(b.s_x1)},
          {"s_z0", bound(b.s_z0)},
          {"s_z1", bound(b.s_z1)},
          {"v_z1", bound(b.v_z1)},
          {"phi_x", {{"raw", b.phi_x.raw}, {"capped", b.phi_x.capped}}},
          {"e_obs", b.e_obs},
          {"ell_raw", b.ell_raw},
          {"ell", b.ell},
          {"rate_per_routed", b.rate_per_routed},
          {"rate_per_sent", b.rate_per_sent},
          {"status", to_string(b.status)}};
}

SecurityParams security_from_json(const nlohmann::json& j, SecurityParams s) {
  auto take = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  take("f_ec", s.f_ec);
  take("eps_cor", s.eps_cor);
  take("eps_sec", s.eps_sec);
  take("p_dc", s.p_dc);
  take("eta_bob", s.eta_bob);
  take("e_mis", s.e_mis);
  take("mu3", s.mu3);
  if (j.contains("eta_bob_in_error_model"))
    s.eta_bob_in_error_model = j.at("eta_bob_in_error_model").get<bool>();
  s.validate();
  return s;
}

}  // namespace qkdnet
