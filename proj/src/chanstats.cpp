#include "qkdnet/chanstats.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "qkdnet/format.hpp"

namespace qkdnet {

double router_loss_db(double t_s, double v_g_km_per_s, double alpha_s_db_per_km) {
  if (t_s < 0.0) throw NegativeStorageTime("storage time must be non-negative");
  if (!(v_g_km_per_s > 0.0)) throw std::invalid_argument("v_g must be positive");
  if (alpha_s_db_per_km < 0.0) throw std::invalid_argument("alpha_s must be non-negative");
  return t_s * v_g_km_per_s * alpha_s_db_per_km + kRouterInsertionLossDb;
}

std::uint64_t PairStats::frames_discarded() const {
  std::uint64_t total = 0;
  for (const auto& [reason, n] : frames_discarded_by_reason) total += n;
  return total;
}

PairStats pair_stats(const SimRecord& record, const NetworkTopology& topology, PairKey pair,
                     EtaAveraging averaging) {
  const SimConfig& cfg = record.config;
  PairStats s;
  s.sender = pair.first;
  s.receiver = pair.second;
  if (auto it = record.pairs.find(pair); it != record.pairs.end()) {
    s.frames_generated = it->second.generated;
    s.frames_discarded_by_reason = it->second.discarded;
  }
  s.n_sent = static_cast<double>(s.frames_generated) * cfg.repetition_rate_hz *
             (cfg.initial_frame_length - cfg.initial_guard_time);

  double loss_sum = 0.0;
  double eta_sum = 0.0;
  double storage_sum = 0.0;
  double pulses = 0.0;
  bool first = true;
  for (const auto& f : record.frames) {
    if (f.src != pair.first || f.dst != pair.second || f.status != FrameStatus::Arrived) continue;
    if (f.excluded) {
      ++s.frames_excluded;
      continue;
    }
    ++s.frames_delivered;
    pulses += static_cast<double>(delivered_pulses(f, cfg.repetition_rate_hz));
    double frame_loss = 0.0;
    for (const auto& hop : f.hops)
      frame_loss += router_loss_db(hop.storage, cfg.fiber_speed_km_per_s,
                                   cfg.storage_attenuation_db_per_km);
    const double fiber_db = topology.path_fiber_loss_db(f.path);
    if (first) {
      s.fiber_length_km = topology.path_length_km(f.path);
      s.fiber_loss_db = fiber_db;
      s.routers_traversed = topology.routers_on(f.path);
      first = false;
    }
    loss_sum += frame_loss;
    eta_sum += std::pow(10.0, -(fiber_db + frame_loss) / 10.0);
    storage_sum += f.cum_storage;
  }
  s.n_routed = pulses;
  if (s.frames_delivered == 0)
    throw NoDeliveredFrames("pair " + topology.node(pair.first).id + "->" +
                            topology.node(pair.second).id + " has no contributing frames");

  const double n = static_cast<double>(s.frames_delivered);
  s.mean_router_loss_db = loss_sum / n;
  s.mean_storage = storage_sum / n;
  s.avg_eta_tot = averaging == EtaAveraging::LogDomain
                      ? std::pow(10.0, -(s.fiber_loss_db + s.mean_router_loss_db) / 10.0)
                      : eta_sum / n;
  return s;
}

SimRecord apply_stl_postfilter(SimRecord record, double stl) {
  for (auto& f : record.frames) {
    if (f.status == FrameStatus::Arrived && exceeds_stl(f.cum_storage, stl)) f.excluded = true;
  }
  return record;
}

StorageHistogram storage_histogram(const SimRecord& record, const NetworkTopology& topology,
                                   const PairKey* pair, double bin_width) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
  StorageHistogram h;
  h.bin_width = bin_width;
  std::map<std::size_t, std::vector<std::uint64_t>> counts;
  for (const auto& f : record.frames) {
    if (f.status != FrameStatus::Arrived || f.excluded) continue;
    if (pair && (f.src != pair->first || f.dst != pair->second)) continue;
    const std::size_t routers = topology.routers_on(f.path);
    const auto bin = static_cast<std::size_t>(std::floor(f.cum_storage / bin_width));
    auto& c = counts[routers];
    if (c.size() <= bin) c.resize(bin + 1, 0);
    ++c[bin];
    ++h.frames[routers];
  }
  for (const auto& [routers, c] : counts) {
    const double total = static_cast<double>(h.frames[routers]);
    auto& out = h.fractions[routers];
    out.reserve(c.size());
    for (auto n : c) out.push_back(static_cast<double>(n) / total);
  }
  return h;
}

const char* to_string(StorageVerdict v) {
  switch (v) {
    case StorageVerdict::StorageFavorable: return "storage_favorable";
    case StorageVerdict::NoStorageFavorable: return "no_storage_favorable";
    case StorageVerdict::Tie: return "tie";
  }
  return "?";
}

StorageComparison storage_comparator(double t_q, double t_d, double alpha_s_db_per_km,
                                     double v_g_km_per_s) {
  if (!(t_q > 0.0)) throw std::invalid_argument("payload duration must be positive");
  if (t_d < 0.0) throw std::invalid_argument("delay must be non-negative");
  StorageComparison c;
  c.eta_s = std::pow(10.0, -(t_d * v_g_km_per_s * alpha_s_db_per_km) / 10.0);
  c.transmitted_if_stored = c.eta_s * t_q;
  c.transmitted_if_discarded = t_q - t_d;
  if (c.transmitted_if_stored > c.transmitted_if_discarded)
    c.verdict = StorageVerdict::StorageFavorable;
  else if (c.transmitted_if_stored < c.transmitted_if_discarded)
    c.verdict = StorageVerdict::NoStorageFavorable;
  else
    c.verdict = StorageVerdict::Tie;
  return c;
}

double storage_crossover_attenuation(double t_q, double t_d, double v_g_km_per_s) {
  if (!(t_q > t_d && t_d > 0.0)) throw std::invalid_argument("crossover needs t_q > t_d > 0");
  // eta_s = (t_q - t_d)/t_q  <=>  alpha_s = -10 log10(1 - t_d/t_q) / (t_d v_g)
  return -10.0 * std::log10(1.0 - t_d / t_q) / (t_d * v_g_km_per_s);
}

void write_pair_stats_csv(std::ostream& out, const std::vector<PairStats>& stats,
                          const NetworkTopology& topology) {
  out << "sender,receiver,routers,N,N0,mean_router_loss_db,avg_eta_tot,frames_delivered,"
         "frames_discarded\n";
  for (const auto& s : stats) {
    out << topology.node(s.sender).id << ',' << topology.node(s.receiver).id << ','
        << s.routers_traversed << ',' << format_number(s.n_routed) << ','
        << format_number(s.n_sent) << ',' << format_number(s.mean_router_loss_db) << ','
        << format_number(s.avg_eta_tot) << ',' << s.frames_delivered << ','
        << s.frames_discarded() << '\n';
  }
}

}  // namespace qkdnet
