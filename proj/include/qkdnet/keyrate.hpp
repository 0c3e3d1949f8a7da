#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace qkdnet {

// Finite-key secure key length for decoy-state BB84 with asymmetric basis
// choice and three intensities {mu1, mu2, mu3}. Detection and error counts
// are the expected values for a channel of mean transmittance eta_tot; they
// are used as if observed.

class KeyRateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DegenerateIntensities : public KeyRateError {
 public:
  using KeyRateError::KeyRateError;
};
class ConstraintViolated : public KeyRateError {
 public:
  using KeyRateError::KeyRateError;
};
class DomainError : public KeyRateError {
 public:
  using KeyRateError::KeyRateError;
};
class InsufficientStatistics : public KeyRateError {
 public:
  using KeyRateError::KeyRateError;
};

struct SecurityParams {
  double f_ec = 1.16;
  double eps_cor = 1e-15;
  double eps_sec = 1e-10;
  double p_dc = 2e-7;
  double eta_bob = 0.15;
  double e_mis = 0.005;
  double mu3 = 2e-4;
  // The printed error model omits eta_bob from the error-count exponent.
  // Setting this inserts it, for sensitivity studies.
  bool eta_bob_in_error_model = false;

  void validate() const;
};

struct ProtocolParams {
  double q_x = 0.5;
  double p_mu1 = 0.6;
  double p_mu2 = 0.3;
  double mu1 = 0.5;
  double mu2 = 0.1;

  double p_mu3() const { return 1.0 - p_mu1 - p_mu2; }
  /// Throws ConstraintViolated unless every probability lies in (0, 1) and
  /// mu1 > mu2 + mu3, mu2 > mu3 >= 0.
  void validate(double mu3) const;
  bool feasible(double mu3) const;
};

struct ChannelInput {
  double n_routed = 0.0;  // N
  double n_sent = 0.0;    // N0
  double eta_tot = 0.0;

  void validate() const;
};

enum class Basis { X, Z };
enum class Intensity { Mu1 = 0, Mu2 = 1, Mu3 = 2 };

/// Intensity value and its selection probability.
double intensity_value(Intensity k, const ProtocolParams& p, const SecurityParams& s);
double intensity_probability(Intensity k, const ProtocolParams& p);

double binary_entropy(double x);

/// Probability that the source emits an n-photon state.
double tau(int n, const ProtocolParams& protocol, const SecurityParams& security);

double detection_count(Basis basis, Intensity k, const ChannelInput& channel,
                       const ProtocolParams& protocol, const SecurityParams& security);
double error_count(Basis basis, Intensity k, const ChannelInput& channel,
                   const ProtocolParams& protocol, const SecurityParams& security);

enum class BoundSign { Lower, Upper };

/// Hoeffding-type correction of a per-intensity count: (e^k/p_k)(count +/- sqrt(total/2 ln(21/eps_sec))).
/// Lower bounds may be negative.
double finite_size_bound(double count, double total, double k, double p_k, BoundSign sign,
                         const SecurityParams& security);

struct Bound {
  double raw = 0.0;      // as computed
  double clamped = 0.0;  // restricted to [0, parent count]
};

/// Vacuum-event lower bound in a basis.
Bound s0_bound(Basis basis, const ChannelInput& channel, const ProtocolParams& protocol,
               const SecurityParams& security);
/// Single-photon lower bound in a basis; s0 is the (clamped) vacuum bound.
Bound s1_bound(Basis basis, const ChannelInput& channel, const ProtocolParams& protocol,
               const SecurityParams& security, double s0);
/// Upper bound on single-photon bit errors in Z.
Bound vz1_bound(const ChannelInput& channel, const ProtocolParams& protocol,
                const SecurityParams& security);

/// Random-sampling deviation term gamma(a, b, c, d).
double gamma_term(double a, double b, double c, double d);

struct PhaseErrorBound {
  double raw = 0.0;
  double capped = 0.0;  // in [0, 0.5]
};

PhaseErrorBound phase_error(double s_z1, double s_x1, double v_z1, const SecurityParams& security);

enum class KeyStatus { Ok, InsufficientStatistics, DomainError };
const char* to_string(KeyStatus s);

struct KeyRateBreakdown {
  double n_x = 0.0, n_z = 0.0;
  double m_x = 0.0, m_z = 0.0;
  std::array<double, 3> n_x_k{}, n_z_k{}, m_x_k{}, m_z_k{};
  Bound s_x0, s_x1, s_z0, s_z1, v_z1;
  PhaseErrorBound phi_x;
  double e_obs = 0.0;
  double ell_raw = 0.0;  // before floor and clamp
  double ell = 0.0;
  double rate_per_routed = 0.0;
  double rate_per_sent = 0.0;
  KeyStatus status = KeyStatus::Ok;
};

KeyRateBreakdown key_length(const ChannelInput& channel, const ProtocolParams& protocol,
                            const SecurityParams& security);

nlohmann::json to_json(const SecurityParams& s);
nlohmann::json to_json(const ProtocolParams& p);
nlohmann::json to_json(const KeyRateBreakdown& b);
/// Overrides fields of base with whatever the JSON object provides.
SecurityParams security_from_json(const nlohmann::json& j, SecurityParams base = {});

}  // namespace qkdnet
