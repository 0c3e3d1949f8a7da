#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qkdnet/topology.hpp"

namespace qkdnet {

class ConfigInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NegativeDelay : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotDelivered : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class ProtocolKind { NoStorage, StorageUnlimited, StorageLimited };

const char* to_string(ProtocolKind kind);
ProtocolKind protocol_from_string(const std::string& s);

/// Router behaviour during header processing and queueing delays.
struct RoutingProtocol {
  ProtocolKind kind = ProtocolKind::NoStorage;
  // Storage time limit in seconds; only read for StorageLimited.
  double stl = std::numeric_limits<double>::infinity();

  static RoutingProtocol no_storage() { return {ProtocolKind::NoStorage, 0.0}; }
  static RoutingProtocol storage_unlimited() {
    return {ProtocolKind::StorageUnlimited, std::numeric_limits<double>::infinity()};
  }
  static RoutingProtocol storage_limited(double stl) { return {ProtocolKind::StorageLimited, stl}; }
};

/// All times in seconds.
struct SimConfig {
  RoutingProtocol protocol;
  double d_proc = 1.0e-4;
  double repetition_rate_hz = 1.0e9;
  double mean_interarrival = 0.03;  // 1/gamma
  std::uint64_t frames_per_sender = 0;
  double initial_frame_length = 2.0e-3;  // T_f^0
  double initial_guard_time = 0.0;       // T_g^0
  double storage_attenuation_db_per_km = 0.16;
  double fiber_speed_km_per_s = 2.0e5;
  std::uint64_t seed = 1;
  // 0 means unbounded (header processors k, forwarding queue capacity q).
  std::size_t header_processors = 0;
  std::size_t queue_capacity = 0;

  void validate() const;
};

enum class FrameStatus { InTransit, Arrived, Discarded };
enum class DiscardReason { None, ZeroLength, StorageLimit, QueueFull };

const char* to_string(FrameStatus status);
const char* to_string(DiscardReason reason);

struct HopLog {
  NodeIndex router = 0;
  double d_queue = 0.0;
  double storage = 0.0;  // T_s at this hop
  double t_f_after = 0.0;
};

/// Mutable routing state of one hybrid frame; mirrors the header fields.
struct Frame {
  std::uint64_t id = 0;
  NodeIndex src = 0;
  NodeIndex dst = 0;
  Path path;
  double t_f = 0.0;
  double t_g = 0.0;
  double cum_storage = 0.0;
  std::vector<HopLog> hops;
  FrameStatus status = FrameStatus::InTransit;
  DiscardReason reason = DiscardReason::None;
  double created_at = 0.0;
  double resolved_at = 0.0;
  // Set by the post-processing storage filter; excluded frames are delivered
  // but do not contribute to key generation.
  bool excluded = false;

  double payload() const { return t_f - t_g; }
};

/// Storage totals are sums of event-time differences; a limit counts as
/// exceeded only beyond this slack (1 ps, far below one pulse period).
inline constexpr double kStlSlack = 1e-12;

inline bool exceeds_stl(double cum_storage, double stl) { return cum_storage > stl + kStlSlack; }

/// Applies one router's d_proc + d_queue to a frame under the given protocol.
/// Returns the storage time T_s charged at this hop (0 for NoStorage). On
/// discard the frame's status and reason are set.
double apply_router_delay(Frame& frame, double delay, const RoutingProtocol& protocol);

/// Surviving payload pulses of a delivered frame, floor(R_t * (t_f - t_g)).
std::uint64_t delivered_pulses(const Frame& frame, double repetition_rate_hz);

using PairKey = std::pair<NodeIndex, NodeIndex>;

struct PairTally {
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::map<DiscardReason, std::uint64_t> discarded;
};

struct SimRecord {
  SimConfig config;
  std::vector<Frame> frames;  // every generated frame, in id order
  std::map<PairKey, PairTally> pairs;
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t discarded = 0;
  std::uint64_t in_transit = 0;
  double end_time = 0.0;
};

bool operator==(const HopLog& a, const HopLog& b);
bool operator==(const Frame& a, const Frame& b);
bool operator==(const PairTally& a, const PairTally& b);
bool operator==(const SimRecord& a, const SimRecord& b);

/// One traffic source draw: when a frame would be generated and where it goes.
struct TrafficDraw {
  NodeIndex sender;
  NodeIndex receiver;
  double gap;  // exponential idle time preceding the frame
};

/// Independent per-sender traffic stream. Each call yields the next idle gap
/// and destination; the simulator adds the gap to the sender's transmission
/// completion time.
class TrafficSource {
 public:
  TrafficSource(const NetworkTopology& topology, NodeIndex sender, const SimConfig& config);
  TrafficDraw next();
  Path route(NodeIndex receiver);

 private:
  const NetworkTopology* topology_;
  NodeIndex sender_;
  std::vector<NodeIndex> receivers_;
  std::mt19937_64 rng_;
  std::exponential_distribution<double> gap_;
};

/// Runs the discrete-event simulation until every generated frame is resolved.
SimRecord run(const SimConfig& config, const NetworkTopology& topology);

/// Per-hop CSV trace: frame_id,src,dst,hop,d_queue_s,T_s_s,t_f_after_s,status
void write_trace(std::ostream& out, const SimRecord& record, const NetworkTopology& topology);

}  // namespace qkdnet
