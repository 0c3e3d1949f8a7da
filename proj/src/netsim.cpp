#include "qkdnet/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <queue>
#include <sstream>

namespace qkdnet {

const char* to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::NoStorage: return "no_storage";
    case ProtocolKind::StorageUnlimited: return "storage_unlimited";
    case ProtocolKind::StorageLimited: return "storage_limited";
  }
  return "?";
}

ProtocolKind protocol_from_string(const std::string& s) {
  if (s == "no_storage") return ProtocolKind::NoStorage;
  if (s == "storage_unlimited") return ProtocolKind::StorageUnlimited;
  if (s == "storage_limited") return ProtocolKind::StorageLimited;
  throw ConfigInvalid("unknown protocol '" + s +
                      "' (expected no_storage, storage_unlimited or storage_limited)");
}

const char* to_string(FrameStatus status) {
  switch (status) {
    case FrameStatus::InTransit: return "in_transit";
    case FrameStatus::Arrived: return "arrived";
    case FrameStatus::Discarded: return "discarded";
  }
  return "?";
}

const char* to_string(DiscardReason reason) {
  switch (reason) {
    case DiscardReason::None: return "none";
    case DiscardReason::ZeroLength: return "zero_length";
    case DiscardReason::StorageLimit: return "storage_limit";
    case DiscardReason::QueueFull: return "queue_full";
  }
  return "?";
}

void SimConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& what) {
    throw ConfigInvalid("sim." + field + ": " + what);
  };
  if (!(d_proc > 0.0)) fail("d_proc", "must be > 0");
  if (!(repetition_rate_hz > 0.0)) fail("repetition_rate_hz", "must be > 0");
  if (!(mean_interarrival > 0.0)) fail("mean_interarrival", "must be > 0");
  if (!(initial_frame_length > 0.0)) fail("initial_frame_length", "must be > 0");
  if (!(initial_guard_time >= 0.0)) fail("initial_guard_time", "must be >= 0");
  if (!(initial_guard_time < initial_frame_length))
    fail("initial_guard_time", "must be smaller than initial_frame_length");
  if (!(storage_attenuation_db_per_km >= 0.0)) fail("storage_attenuation_db_per_km", "must be >= 0");
  if (!(fiber_speed_km_per_s > 0.0)) fail("fiber_speed_km_per_s", "must be > 0");
  if (protocol.kind == ProtocolKind::StorageLimited && !(protocol.stl >= 0.0))
    fail("stl", "must be >= 0 for storage_limited");
}

double apply_router_delay(Frame& frame, double delay, const RoutingProtocol& protocol) {
  if (delay < 0.0) throw NegativeDelay("router delay must be non-negative");
  if (frame.status != FrameStatus::InTransit)
    throw std::logic_error("apply_router_delay on a frame that is not in transit");

  if (protocol.kind == ProtocolKind::NoStorage) {
    frame.t_f -= delay;
    frame.t_g = std::max(0.0, frame.t_g - delay);
    if (frame.t_f <= 0.0) {
      frame.t_f = 0.0;
      frame.t_g = 0.0;
      frame.status = FrameStatus::Discarded;
      frame.reason = DiscardReason::ZeroLength;
    }
    return 0.0;
  }

  // Guard time absorbs the delay first; whatever remains is spent in the
  // delay line. The guard is never replenished.
  const double absorbed = std::min(frame.t_g, delay);
  const double stored = std::max(0.0, delay - frame.t_g);
  frame.t_f -= absorbed;
  frame.t_g -= absorbed;
  frame.cum_storage += stored;
  if (protocol.kind == ProtocolKind::StorageLimited && exceeds_stl(frame.cum_storage, protocol.stl)) {
    frame.status = FrameStatus::Discarded;
    frame.reason = DiscardReason::StorageLimit;
  }
  return stored;
}

std::uint64_t delivered_pulses(const Frame& frame, double repetition_rate_hz) {
  if (frame.status != FrameStatus::Arrived) throw NotDelivered("frame " + std::to_string(frame.id) +
                                                              " was not delivered");
  const double pulses = std::floor(repetition_rate_hz * (frame.t_f - frame.t_g));
  return pulses > 0.0 ? static_cast<std::uint64_t>(pulses) : 0;
}

bool operator==(const HopLog& a, const HopLog& b) {
  return a.router == b.router && a.d_queue == b.d_queue && a.storage == b.storage &&
         a.t_f_after == b.t_f_after;
}

bool operator==(const Frame& a, const Frame& b) {
  return a.id == b.id && a.src == b.src && a.dst == b.dst && a.path == b.path && a.t_f == b.t_f &&
         a.t_g == b.t_g && a.cum_storage == b.cum_storage && a.hops == b.hops &&
         a.status == b.status && a.reason == b.reason && a.created_at == b.created_at &&
         a.resolved_at == b.resolved_at && a.excluded == b.excluded;
}

bool operator==(const PairTally& a, const PairTally& b) {
  return a.generated == b.generated && a.delivered == b.delivered && a.discarded == b.discarded;
}

bool operator==(const SimRecord& a, const SimRecord& b) {
  return a.frames == b.frames && a.pairs == b.pairs && a.generated == b.generated &&
         a.delivered == b.delivered && a.discarded == b.discarded &&
         a.in_transit == b.in_transit && a.end_time == b.end_time;
}

TrafficSource::TrafficSource(const NetworkTopology& topology, NodeIndex sender,
                             const SimConfig& config)
    : topology_(&topology),
      sender_(sender),
      receivers_(topology.receivers()),
      gap_(1.0 / config.mean_interarrival) {
  if (receivers_.empty()) throw ConfigInvalid("topology has no receivers");
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                    static_cast<std::uint32_t>(config.seed >> 32), static_cast<std::uint32_t>(sender),
                    0x51ed2705u};
  rng_.seed(seq);
}

TrafficDraw TrafficSource::next() {
  const double gap = gap_(rng_);
  std::uniform_int_distribution<std::size_t> pick(0, receivers_.size() - 1);
  return {sender_, receivers_[pick(rng_)], gap};
}

Path TrafficSource::route(NodeIndex receiver) {
  return least_cost_path(*topology_, sender_, receiver, rng_);
}

namespace {

enum class EventType { Generate, Arrive, HeaderDone, ServerFree };

struct Event {
  double time;
  std::uint64_t seq;
  EventType type;
  std::uint64_t subject;  // sender index for Generate, frame id otherwise
  NodeIndex node;
  bool operator>(const Event& o) const {
    return time != o.time ? time > o.time : seq > o.seq;
  }
};

struct RouterState {
  double server_busy_until = 0.0;
  bool busy = false;
  std::deque<std::uint64_t> fifo;
  std::size_t headers_in_progress = 0;
  std::deque<std::uint64_t> header_wait;
};

struct SenderState {
  TrafficSource source;
  std::uint64_t emitted = 0;
  TrafficDraw pending;
};

class Simulator {
 public:
  Simulator(const SimConfig& config, const NetworkTopology& topology)
      : config_(config), topology_(topology), routers_(topology.size()) {
    record_.config = config;
    for (NodeIndex s : topology.senders()) senders_.push_back({TrafficSource(topology, s, config), 0, {}});
  }

  SimRecord run() {
    for (std::size_t i = 0; i < senders_.size(); ++i) schedule_generation(i, 0.0);
    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      now_ = ev.time;
      switch (ev.type) {
        case EventType::Generate: generate(ev.subject); break;
        case EventType::Arrive: arrive(ev.subject, ev.node); break;
        case EventType::HeaderDone: header_done(ev.subject, ev.node); break;
        case EventType::ServerFree: server_free(ev.node); break;
      }
    }
    for (const auto& f : record_.frames)
      if (f.status == FrameStatus::InTransit) ++record_.in_transit;
    record_.end_time = now_;
    return std::move(record_);
  }

 private:
  void push(double t, EventType type, std::uint64_t subject, NodeIndex node) {
    events_.push({t, seq_++, type, subject, node});
  }

  void schedule_generation(std::size_t sender, double ready_at) {
    auto& s = senders_[sender];
    if (s.emitted >= config_.frames_per_sender) return;
    s.pending = s.source.next();
    push(ready_at + s.pending.gap, EventType::Generate, sender, s.pending.sender);
  }

  double propagation(NodeIndex a, NodeIndex b) const {
    return topology_.link_between(a, b).length_km / config_.fiber_speed_km_per_s;
  }

  void generate(std::size_t sender) {
    auto& s = senders_[sender];
    Frame f;
    f.id = record_.frames.size();
    f.src = s.pending.sender;
    f.dst = s.pending.receiver;
    f.path = s.source.route(f.dst);
    f.t_f = config_.initial_frame_length;
    f.t_g = config_.initial_guard_time;
    f.created_at = now_;
    ++s.emitted;
    ++record_.generated;
    ++record_.pairs[{f.src, f.dst}].generated;

    // The sender has no queue: it transmits immediately and only draws the
    // next idle gap once this transmission has completed.
    const double done = now_ + f.t_f;
    push(done + propagation(f.path[0], f.path[1]), EventType::Arrive, f.id, f.path[1]);
    arrival_time_.push_back(0.0);
    hop_index_.push_back(1);
    record_.frames.push_back(std::move(f));
    schedule_generation(sender, done);
  }

  void arrive(std::uint64_t id, NodeIndex node) {
    Frame& f = record_.frames[id];
    arrival_time_[id] = now_;
    if (topology_.node(node).kind != NodeKind::Router) {
      // Receiver header processing does not touch the payload.
      f.status = FrameStatus::Arrived;
      f.resolved_at = now_ + config_.d_proc;
      ++record_.delivered;
      ++record_.pairs[{f.src, f.dst}].delivered;
      return;
    }
    auto& r = routers_[node];
    if (config_.header_processors == 0 || r.headers_in_progress < config_.header_processors) {
      ++r.headers_in_progress;
      push(now_ + config_.d_proc, EventType::HeaderDone, id, node);
    } else {
      r.header_wait.push_back(id);
    }
  }

  void header_done(std::uint64_t id, NodeIndex node) {
    auto& r = routers_[node];
    --r.headers_in_progress;
    if (!r.header_wait.empty()) {
      const auto next = r.header_wait.front();
      r.header_wait.pop_front();
      ++r.headers_in_progress;
      push(now_ + config_.d_proc, EventType::HeaderDone, next, node);
    }
    if (config_.queue_capacity != 0 && (r.busy || !r.fifo.empty()) &&
        r.fifo.size() >= config_.queue_capacity) {
      discard(id, DiscardReason::QueueFull);
      return;
    }
    r.fifo.push_back(id);
    if (!r.busy) start_service(node);
  }

  void server_free(NodeIndex node) {
    routers_[node].busy = false;
    start_service(node);
  }

  void start_service(NodeIndex node) {
    auto& r = routers_[node];
    while (!r.busy && !r.fifo.empty()) {
      const auto id = r.fifo.front();
      r.fifo.pop_front();
      Frame& f = record_.frames[id];
      const double delay = now_ - arrival_time_[id];
      const double stored = apply_router_delay(f, delay, config_.protocol);
      f.hops.push_back({node, delay - config_.d_proc, stored, f.t_f});
      if (f.status == FrameStatus::Discarded) {
        discard(id, f.reason);
        continue;
      }
      const auto h = hop_index_[id];
      const NodeIndex next = f.path[h + 1];
      hop_index_[id] = h + 1;
      r.busy = true;
      r.server_busy_until = now_ + f.t_f;
      push(r.server_busy_until, EventType::ServerFree, 0, node);
      push(r.server_busy_until + propagation(node, next), EventType::Arrive, id, next);
    }
  }

  void discard(std::uint64_t id, DiscardReason reason) {
    Frame& f = record_.frames[id];
    f.status = FrameStatus::Discarded;
    f.reason = reason;
    f.resolved_at = now_;
    ++record_.discarded;
    ++record_.pairs[{f.src, f.dst}].discarded[reason];
  }

  const SimConfig& config_;
  const NetworkTopology& topology_;
  std::vector<RouterState> routers_;
  std::vector<SenderState> senders_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::vector<double> arrival_time_;
  std::vector<std::size_t> hop_index_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
  SimRecord record_;
};

}  // namespace

SimRecord run(const SimConfig& config, const NetworkTopology& topology) {
  config.validate();
  if (topology.senders().empty()) throw ConfigInvalid("topology has no senders");
  return Simulator(config, topology).run();
}

void write_trace(std::ostream& out, const SimRecord& record, const NetworkTopology& topology) {
  out << "frame_id,src,dst,hop,d_queue_s,T_s_s,t_f_after_s,status\n";
  std::ostringstream line;
  line.imbue(std::locale::classic());
  line.precision(12);
  for (const auto& f : record.frames) {
    for (std::size_t h = 0; h < f.hops.size(); ++h) {
      const bool last = h + 1 == f.hops.size();
      const std::string status =
          last && f.status == FrameStatus::Discarded
              ? std::string("discarded:") + to_string(f.reason)
              : (last && f.status == FrameStatus::Arrived ? "arrived" : "in_transit");
      line.str("");
      line << f.id << ',' << topology.node(f.src).id << ',' << topology.node(f.dst).id << ','
           << h << ',' << f.hops[h].d_queue << ',' << f.hops[h].storage << ','
           << f.hops[h].t_f_after << ',' << status << '\n';
      out << line.str();
    }
  }
}

}  // namespace qkdnet
