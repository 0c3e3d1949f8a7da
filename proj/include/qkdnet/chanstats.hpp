#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <vector>

#include "qkdnet/netsim.hpp"
#include "qkdnet/topology.hpp"

namespace qkdnet {

class NegativeStorageTime : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NoDeliveredFrames : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kRouterInsertionLossDb = 4.0;

/// Loss of one router in dB: delay-line attenuation over t_s * v_g km plus
/// the fixed insertion loss.
double router_loss_db(double t_s, double v_g_km_per_s, double alpha_s_db_per_km);

/// How per-frame transmittances are combined into the channel average.
enum class EtaAveraging {
  LogDomain,  // average router loss in dB, then convert
  Linear,     // average the per-frame linear transmittance
};

struct PairStats {
  NodeIndex sender = 0;
  NodeIndex receiver = 0;
  std::uint64_t frames_generated = 0;
  std::uint64_t frames_delivered = 0;  // contributing to the key
  std::uint64_t frames_excluded = 0;   // delivered but removed by a post-processing STL
  std::map<DiscardReason, std::uint64_t> frames_discarded_by_reason;
  double n_routed = 0.0;  // N
  double n_sent = 0.0;    // N0
  double fiber_length_km = 0.0;
  double fiber_loss_db = 0.0;
  double mean_router_loss_db = 0.0;
  double avg_eta_tot = 0.0;
  double mean_storage = 0.0;
  std::size_t routers_traversed = 0;

  std::uint64_t frames_discarded() const;
};

PairStats pair_stats(const SimRecord& record, const NetworkTopology& topology, PairKey pair,
                     EtaAveraging averaging = EtaAveraging::LogDomain);

/// Marks delivered frames whose cumulative storage exceeds stl as excluded.
SimRecord apply_stl_postfilter(SimRecord record, double stl);

/// Fraction of delivered frames per storage bin, grouped by the number of
/// routers each frame traversed. Bin i covers [i*w, (i+1)*w).
struct StorageHistogram {
  double bin_width = 0.0;
  std::map<std::size_t, std::vector<double>> fractions;
  std::map<std::size_t, std::uint64_t> frames;
};

inline constexpr double kDefaultHistogramBin = 25e-6;

/// Histogram over one pair's delivered frames, or over every pair when
/// pair is null.
StorageHistogram storage_histogram(const SimRecord& record, const NetworkTopology& topology,
                                   const PairKey* pair, double bin_width = kDefaultHistogramBin);

enum class StorageVerdict { StorageFavorable, NoStorageFavorable, Tie };
const char* to_string(StorageVerdict v);

struct StorageComparison {
  double eta_s = 1.0;
  double transmitted_if_stored = 0.0;     // eta_s * t_q, in seconds of payload
  double transmitted_if_discarded = 0.0;  // t_q - t_d
  StorageVerdict verdict = StorageVerdict::Tie;
};

/// Compares holding a payload of duration t_q in a delay line for t_d against
/// dropping its first t_d seconds.
StorageComparison storage_comparator(double t_q, double t_d, double alpha_s_db_per_km,
                                     double v_g_km_per_s);

/// Storage attenuation at which both strategies transmit equally for fixed
/// t_q > t_d > 0.
double storage_crossover_attenuation(double t_q, double t_d, double v_g_km_per_s);

/// sender,receiver,routers,N,N0,mean_router_loss_db,avg_eta_tot,frames_delivered,frames_discarded
void write_pair_stats_csv(std::ostream& out, const std::vector<PairStats>& stats,
                          const NetworkTopology& topology);

}  // namespace qkdnet
