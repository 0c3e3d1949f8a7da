#include "qkdnet/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "qkdnet/format.hpp"

namespace qkdnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMicro = 1e-6;

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  throw ScenarioConfigError(field + ": " + what);
}

double number_or_inf(const nlohmann::json& v, const std::string& field) {
  if (v.is_null()) return kInf;
  if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity"))
    return kInf;
  if (!v.is_number()) config_error(field, "expected a number, null or \"inf\"");
  return v.get<double>();
}

nlohmann::json inf_to_null(double v) {
  if (std::isinf(v)) return nullptr;
  return v;
}

std::string coord_string(Axis axis, double v) {
  if (axis == Axis::Protocol) return to_string(static_cast<ProtocolKind>(static_cast<int>(v)));
  return format_number(v);
}

void apply_axis(Axis axis, double v, SimConfig& sim, double& postprocess_stl) {
  switch (axis) {
    case Axis::MeanInterarrival: sim.mean_interarrival = v; break;
    case Axis::InitialFrameLength: sim.initial_frame_length = v; break;
    case Axis::InitialGuardTime: sim.initial_guard_time = v; break;
    case Axis::StorageAttenuation: sim.storage_attenuation_db_per_km = v; break;
    case Axis::Stl: sim.protocol.stl = v; break;
    case Axis::PostprocessStl: postprocess_stl = v; break;
    case Axis::Protocol: sim.protocol.kind = static_cast<ProtocolKind>(static_cast<int>(v)); break;
  }
}

// Cartesian product, first axis slowest.
std::vector<std::vector<double>> enumerate_cells(const std::vector<SweepAxis>& sweep) {
  std::vector<std::vector<double>> cells{{}};
  for (const auto& ax : sweep) {
    std::vector<std::vector<double>> next;
    next.reserve(cells.size() * ax.values.size());
    for (const auto& c : cells)
      for (double v : ax.values) {
        auto e = c;
        e.push_back(v);
        next.push_back(std::move(e));
      }
    cells = std::move(next);
  }
  return cells;
}

NetworkTopology resolve_topology(const ScenarioConfig& c) {
  return c.topology ? topology_from_json(*c.topology) : build_default_topology();
}

struct CellPlan {
  std::vector<double> coords;
  SimConfig sim;
  double postprocess_stl = kInf;
  std::size_t group = 0;
};

}  // namespace

const char* to_string(Axis a) {
  switch (a) {
    case Axis::MeanInterarrival: return "mean_interarrival";
    case Axis::InitialFrameLength: return "initial_frame_length";
    case Axis::InitialGuardTime: return "initial_guard_time";
    case Axis::StorageAttenuation: return "storage_attenuation_db_per_km";
    case Axis::Stl: return "stl";
    case Axis::PostprocessStl: return "postprocess_stl";
    case Axis::Protocol: return "protocol";
  }
  return "?";
}

Axis axis_from_string(const std::string& s) {
  for (Axis a : {Axis::MeanInterarrival, Axis::InitialFrameLength, Axis::InitialGuardTime,
                 Axis::StorageAttenuation, Axis::Stl, Axis::PostprocessStl, Axis::Protocol})
    if (s == to_string(a)) return a;
  config_error("sweep.axis", "unknown axis '" + s + "'");
}

bool is_simulation_axis(Axis a) {
  return a != Axis::StorageAttenuation && a != Axis::PostprocessStl;
}

std::vector<PairSpec> default_pairs() { return {{"A31", "B32"}, {"A42", "B22"}, {"A22", "B31"}}; }

void ScenarioConfig::validate() const {
  try {
    sim.validate();
  } catch (const ConfigInvalid& e) {
    throw ScenarioConfigError(e.what());
  }
  if (frames_per_pair && *frames_per_pair == 0) config_error("frames_per_pair", "must be > 0");
  if (!(postprocess_stl >= 0.0)) config_error("postprocess_stl", "must be >= 0");
  std::vector<Axis> seen;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const auto& ax = sweep[i];
    const std::string field = "sweep[" + std::to_string(i) + "]";
    if (ax.values.empty()) config_error(field, "axis '" + std::string(to_string(ax.axis)) + "' has no values");
    if (std::find(seen.begin(), seen.end(), ax.axis) != seen.end())
      config_error(field, "axis '" + std::string(to_string(ax.axis)) + "' listed twice");
    seen.push_back(ax.axis);
    for (double v : ax.values) {
      if (std::isnan(v)) config_error(field, "NaN value");
      if (ax.axis == Axis::Protocol && (v < 0 || v > 2 || v != std::floor(v)))
        config_error(field, "invalid protocol value");
      if (ax.axis != Axis::Protocol && v < 0) config_error(field, "values must be >= 0");
    }
  }
  try {
    security.validate();
  } catch (const KeyRateError& e) {
    config_error("security", e.what());
  }
  if (opt.grid_points_per_axis < 1) config_error("opt.grid_points_per_axis", "must be >= 1");
  if (histogram_bin && !(*histogram_bin > 0.0)) config_error("histogram_bin", "must be > 0");
  NetworkTopology topo = [&] {
    try {
      return resolve_topology(*this);
    } catch (const TopologyError& e) {
      config_error("topology", e.what());
    }
  }();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string field = "pairs[" + std::to_string(i) + "]";
    if (!topo.contains(pairs[i].sender) ||
        topo.node(topo.index_of(pairs[i].sender)).kind != NodeKind::Sender)
      config_error(field, "'" + pairs[i].sender + "' is not a sender");
    if (!topo.contains(pairs[i].receiver) ||
        topo.node(topo.index_of(pairs[i].receiver)).kind != NodeKind::Receiver)
      config_error(field, "'" + pairs[i].receiver + "' is not a receiver");
  }
}

std::size_t ScenarioConfig::cell_count() const {
  std::size_t n = 1;
  for (const auto& ax : sweep) n *= ax.values.size();
  return n;
}

ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) config_error("<root>", "expected a JSON object");
  ScenarioConfig c;
  try {
    if (j.contains("name")) c.name = j.at("name").get<std::string>();
    if (j.contains("topology") && !j.at("topology").is_null()) c.topology = j.at("topology");
    if (j.contains("topology_file")) {
      std::filesystem::path p = j.at("topology_file").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      std::ifstream in(p);
      if (!in) config_error("topology_file", "cannot open '" + p.string() + "'");
      c.topology = nlohmann::json::parse(in);
    }
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      auto take = [&](const char* key, double& field) {
        if (s.contains(key)) field = s.at(key).get<double>();
      };
      if (s.contains("protocol")) c.sim.protocol.kind = protocol_from_string(s.at("protocol").get<std::string>());
      if (s.contains("stl")) c.sim.protocol.stl = number_or_inf(s.at("stl"), "sim.stl");
      take("d_proc", c.sim.d_proc);
      take("repetition_rate_hz", c.sim.repetition_rate_hz);
      take("mean_interarrival", c.sim.mean_interarrival);
      take("initial_frame_length", c.sim.initial_frame_length);
      take("initial_guard_time", c.sim.initial_guard_time);
      take("storage_attenuation_db_per_km", c.sim.storage_attenuation_db_per_km);
      take("fiber_speed_km_per_s", c.sim.fiber_speed_km_per_s);
      if (s.contains("frames_per_sender")) c.sim.frames_per_sender = s.at("frames_per_sender").get<std::uint64_t>();
      if (s.contains("header_processors")) c.sim.header_processors = s.at("header_processors").get<std::size_t>();
      if (s.contains("queue_capacity")) c.sim.queue_capacity = s.at("queue_capacity").get<std::size_t>();
    }
    if (j.contains("seed")) c.sim.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("frames_per_pair") && !j.at("frames_per_pair").is_null())
      c.frames_per_pair = j.at("frames_per_pair").get<std::uint64_t>();
    if (j.contains("postprocess_stl"))
      c.postprocess_stl = number_or_inf(j.at("postprocess_stl"), "postprocess_stl");
    if (j.contains("sweep")) {
      for (const auto& ax : j.at("sweep")) {
        SweepAxis s;
        s.axis = axis_from_string(ax.at("axis").get<std::string>());
        for (const auto& v : ax.at("values")) {
          if (s.axis == Axis::Protocol)
            s.values.push_back(static_cast<double>(protocol_from_string(v.get<std::string>())));
          else
            s.values.push_back(number_or_inf(v, std::string("sweep.") + to_string(s.axis)));
        }
        c.sweep.push_back(std::move(s));
      }
    }
    if (j.contains("pairs")) {
      const auto& list = j.at("pairs");
      if (!list.is_array()) config_error("pairs", "expected an array of [sender, receiver]");
      for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& p = list[i];
        if (p.is_array() && p.size() == 2)
          c.pairs.push_back({p[0].get<std::string>(), p[1].get<std::string>()});
        else if (p.is_object() && p.contains("sender") && p.contains("receiver"))
          c.pairs.push_back({p["sender"].get<std::string>(), p["receiver"].get<std::string>()});
        else
          config_error("pairs[" + std::to_string(i) + "]", "expected [sender, receiver]");
      }
    } else {
      c.pairs = default_pairs();
    }
    if (j.contains("security")) c.security = security_from_json(j.at("security"));
    if (j.contains("opt")) {
      const auto& o = j.at("opt");
      if (o.contains("grid_points_per_axis")) c.opt.grid_points_per_axis = o.at("grid_points_per_axis").get<int>();
      if (o.contains("refine_max_iters")) c.opt.refine_max_iters = o.at("refine_max_iters").get<int>();
      if (o.contains("refine_tolerance")) c.opt.refine_tolerance = o.at("refine_tolerance").get<double>();
      if (o.contains("plateau_iters")) c.opt.plateau_iters = o.at("plateau_iters").get<int>();
      if (o.contains("seed")) c.opt.seed = o.at("seed").get<std::uint64_t>();
    }
    if (j.contains("averaging")) {
      const auto a = j.at("averaging").get<std::string>();
      if (a == "log") c.averaging = EtaAveraging::LogDomain;
      else if (a == "linear") c.averaging = EtaAveraging::Linear;
      else config_error("averaging", "expected 'log' or 'linear'");
    }
    if (j.contains("histogram_bin") && !j.at("histogram_bin").is_null())
      c.histogram_bin = j.at("histogram_bin").get<double>();
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioConfigError(std::string("malformed scenario JSON: ") + e.what());
  } catch (const KeyRateError& e) {
    config_error("security", e.what());
  }
  c.validate();
  return c;
}

nlohmann::json scenario_to_json(const ScenarioConfig& c) {
  nlohmann::json sweep = nlohmann::json::array();
  for (const auto& ax : c.sweep) {
    nlohmann::json values = nlohmann::json::array();
    for (double v : ax.values) {
      if (ax.axis == Axis::Protocol) values.push_back(coord_string(ax.axis, v));
      else values.push_back(inf_to_null(v));
    }
    sweep.push_back({{"axis", to_string(ax.axis)}, {"values", values}});
  }
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : c.pairs) pairs.push_back({p.sender, p.receiver});
  nlohmann::json j{
      {"name", c.name},
      {"sim",
       {{"protocol", to_string(c.sim.protocol.kind)},
        {"stl", inf_to_null(c.sim.protocol.stl)},
        {"d_proc", c.sim.d_proc},
        {"repetition_rate_hz", c.sim.repetition_rate_hz},
        {"mean_interarrival", c.sim.mean_interarrival},
        {"frames_per_sender", c.sim.frames_per_sender},
        {"initial_frame_length", c.sim.initial_frame_length},
        {"initial_guard_time", c.sim.initial_guard_time},
        {"storage_attenuation_db_per_km", c.sim.storage_attenuation_db_per_km},
        {"fiber_speed_km_per_s", c.sim.fiber_speed_km_per_s},
        {"header_processors", c.sim.header_processors},
        {"queue_capacity", c.sim.queue_capacity}}},
      {"seed", c.sim.seed},
      {"frames_per_pair", c.frames_per_pair ? nlohmann::json(*c.frames_per_pair) : nlohmann::json()},
      {"postprocess_stl", inf_to_null(c.postprocess_stl)},
      {"sweep", sweep},
      {"pairs", pairs},
      {"security", to_json(c.security)},
      {"opt",
       {{"grid_points_per_axis", c.opt.grid_points_per_axis},
        {"refine_max_iters", c.opt.refine_max_iters},
        {"refine_tolerance", c.opt.refine_tolerance},
        {"plateau_iters", c.opt.plateau_iters},
        {"seed", c.opt.seed}}},
      {"averaging", c.averaging == EtaAveraging::LogDomain ? "log" : "linear"},
      {"histogram_bin", c.histogram_bin ? nlohmann::json(*c.histogram_bin) : nlohmann::json()},
      {"output", c.output}};
  if (c.topology) j["topology"] = *c.topology;
  return j;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 over (master, index)
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ScenarioResult run_scenario(const ScenarioConfig& config, unsigned workers) {
  config.validate();
  const NetworkTopology topology = resolve_topology(config);
  const auto pairs = config.pairs.empty() ? default_pairs() : config.pairs;
  std::vector<PairKey> pair_keys;
  for (const auto& p : pairs) pair_keys.push_back({topology.index_of(p.sender), topology.index_of(p.receiver)});

  SimConfig base = config.sim;
  if (config.frames_per_pair) base.frames_per_sender = topology.receivers().size() * *config.frames_per_pair;

  // Cells that differ only in post-processing coordinates share one run.
  std::vector<CellPlan> plans;
  std::vector<std::vector<double>> group_keys;
  for (auto& coords : enumerate_cells(config.sweep)) {
    CellPlan plan{coords, base, config.postprocess_stl, 0};
    std::vector<double> key;
    for (std::size_t a = 0; a < config.sweep.size(); ++a) {
      apply_axis(config.sweep[a].axis, coords[a], plan.sim, plan.postprocess_stl);
      if (is_simulation_axis(config.sweep[a].axis)) key.push_back(coords[a]);
    }
    auto it = std::find(group_keys.begin(), group_keys.end(), key);
    plan.group = static_cast<std::size_t>(it - group_keys.begin());
    if (it == group_keys.end()) group_keys.push_back(key);
    plans.push_back(std::move(plan));
  }

  ScenarioResult result;
  result.config = config;
  for (std::size_t g = 0; g < group_keys.size(); ++g)
    result.group_seeds.push_back(derive_seed(config.sim.seed, g));
  for (const auto& p : plans) result.cell_group.push_back(p.group);

  std::vector<std::vector<ResultRow>> cell_rows(plans.size());
  std::vector<std::optional<HistogramBlock>> hist(group_keys.size());
  std::vector<char> cell_failed(plans.size(), 0);

  auto run_group = [&](std::size_t g) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < plans.size(); ++i)
      if (plans[i].group == g) members.push_back(i);
    SimConfig sim = plans[members.front()].sim;
    sim.seed = result.group_seeds[g];

    std::optional<SimRecord> record;
    std::string failure;
    try {
      record = run(sim, topology);
    } catch (const std::exception& e) {
      failure = e.what();
    }
    if (record && config.histogram_bin)
      hist[g] = HistogramBlock{g, storage_histogram(*record, topology, nullptr, *config.histogram_bin)};

    for (std::size_t i : members) {
      const CellPlan& plan = plans[i];
      for (std::size_t p = 0; p < pair_keys.size(); ++p) {
        ResultRow row;
        row.cell = i;
        row.group = g;
        row.seed = sim.seed;
        row.sender = pairs[p].sender;
        row.receiver = pairs[p].receiver;
        row.coords = plan.coords;
        if (!record) {
          row.reason = "cell_failed: " + failure;
          cell_failed[i] = 1;
          cell_rows[i].push_back(std::move(row));
          continue;
        }
        try {
          SimRecord view = std::isinf(plan.postprocess_stl)
                               ? *record
                               : apply_stl_postfilter(*record, plan.postprocess_stl);
          view.config.storage_attenuation_db_per_km = plan.sim.storage_attenuation_db_per_km;
          const auto tally = view.pairs.find(pair_keys[p]);
          if (tally != view.pairs.end()) {
            row.frames_generated = tally->second.generated;
            for (const auto& [reason, n] : tally->second.discarded) row.frames_discarded += n;
          }
          std::mt19937_64 probe(0);
          row.routers = topology.routers_on(
              least_cost_path(topology, pair_keys[p].first, pair_keys[p].second, probe));
          PairStats stats;
          try {
            stats = pair_stats(view, topology, pair_keys[p], config.averaging);
          } catch (const NoDeliveredFrames&) {
            for (const auto& f : view.frames)
              if (f.src == pair_keys[p].first && f.dst == pair_keys[p].second && f.excluded)
                ++row.frames_excluded_by_stl;
            row.n_sent = static_cast<double>(row.frames_generated) * sim.repetition_rate_hz *
                         (sim.initial_frame_length - sim.initial_guard_time);
            row.reason = "no_delivered_frames";
            cell_rows[i].push_back(std::move(row));
            continue;
          }
          row.routers = stats.routers_traversed;
          row.frames_delivered = stats.frames_delivered;
          row.frames_excluded_by_stl = stats.frames_excluded;
          row.n_routed = stats.n_routed;
          row.n_sent = stats.n_sent;
          row.avg_eta_tot = stats.avg_eta_tot;
          row.mean_storage = stats.mean_storage;
          if (!(stats.n_routed > 0.0)) {
            row.reason = "no_pulses";
            cell_rows[i].push_back(std::move(row));
            continue;
          }
          OptSettings opt = config.opt;
          const OptResult r = optimize({stats.n_routed, stats.n_sent, stats.avg_eta_tot}, config.security, opt);
          row.best = r.best;
          row.ell = r.breakdown.ell;
          row.rate_per_sent = r.breakdown.rate_per_sent;
          if (r.zero_key_everywhere || r.breakdown.ell <= 0.0) row.reason = "zero_key";
        } catch (const std::exception& e) {
          row.reason = std::string("cell_failed: ") + e.what();
          cell_failed[i] = 1;
        }
        cell_rows[i].push_back(std::move(row));
      }
    }
  };

  const unsigned n_workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(group_keys.size())));
  if (n_workers == 1) {
    for (std::size_t g = 0; g < group_keys.size(); ++g) run_group(g);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t g = next++; g < group_keys.size(); g = next++) run_group(g);
      });
    for (auto& t : pool) t.join();
  }

  for (auto& rows : cell_rows)
    for (auto& r : rows) result.rows.push_back(std::move(r));
  for (auto& h : hist)
    if (h) result.histograms.push_back(std::move(*h));
  result.failed_cells = static_cast<std::size_t>(std::count(cell_failed.begin(), cell_failed.end(), 1));
  return result;
}

void write_rows_csv(std::ostream& out, const ScenarioResult& result) {
  const auto& sweep = result.config.sweep;
  out << "cell,seed,sender,receiver,routers";
  for (const auto& ax : sweep) out << ',' << to_string(ax.axis);
  out << ",frames_generated,frames_delivered,frames_excluded_by_stl,frames_discarded,N,N0,"
         "avg_eta_tot,mean_storage_s,rate_per_sent,ell,q_x,p_mu1,p_mu2,mu1,mu2,reason\n";
  for (const auto& r : result.rows) {
    out << r.cell << ',' << r.seed << ',' << r.sender << ',' << r.receiver << ',' << r.routers;
    for (std::size_t a = 0; a < sweep.size(); ++a) out << ',' << coord_string(sweep[a].axis, r.coords[a]);
    out << ',' << r.frames_generated << ',' << r.frames_delivered << ',' << r.frames_excluded_by_stl
        << ',' << r.frames_discarded << ',' << format_number(r.n_routed) << ','
        << format_number(r.n_sent) << ',' << format_number(r.avg_eta_tot) << ','
        << format_number(r.mean_storage) << ',' << format_number(r.rate_per_sent) << ','
        << format_number(r.ell);
    if (r.best) {
      out << ',' << format_number(r.best->q_x) << ',' << format_number(r.best->p_mu1) << ','
          << format_number(r.best->p_mu2) << ',' << format_number(r.best->mu1) << ','
          << format_number(r.best->mu2);
    } else {
      out << ",,,,,";
    }
    out << ',' << r.reason << '\n';
  }
}

void write_histograms_csv(std::ostream& out, const ScenarioResult& result) {
  out << "group,routers,bin_start_s,bin_end_s,fraction,frames\n";
  for (const auto& block : result.histograms) {
    const auto& h = block.histogram;
    for (const auto& [routers, fractions] : h.fractions) {
      for (std::size_t b = 0; b < fractions.size(); ++b) {
        out << block.group << ',' << routers << ',' << format_number(b * h.bin_width) << ','
            << format_number((b + 1) * h.bin_width) << ',' << format_number(fractions[b]) << ','
            << h.frames.at(routers) << '\n';
      }
    }
  }
}

nlohmann::json manifest(const ScenarioResult& result) {
  nlohmann::json cells = nlohmann::json::array();
  std::vector<bool> listed(result.cell_group.size(), false);
  for (const auto& r : result.rows) {
    if (listed[r.cell]) continue;
    listed[r.cell] = true;
    nlohmann::json coords = nlohmann::json::object();
    for (std::size_t a = 0; a < result.config.sweep.size(); ++a) {
      const auto axis = result.config.sweep[a].axis;
      if (axis == Axis::Protocol) coords[to_string(axis)] = coord_string(axis, r.coords[a]);
      else coords[to_string(axis)] = inf_to_null(r.coords[a]);
    }
    cells.push_back({{"index", r.cell}, {"group", r.group}, {"seed", r.seed}, {"coords", coords}});
  }
  return {{"tool", "qkdnet"},
          {"version", kVersion},
          {"config", scenario_to_json(result.config)},
          {"group_seeds", result.group_seeds},
          {"cells", cells},
          {"rows", result.rows.size()},
          {"failed_cells", result.failed_cells}};
}

nlohmann::json rows_to_json(const ScenarioResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : result.rows) {
    nlohmann::json coords = nlohmann::json::object();
    for (std::size_t a = 0; a < result.config.sweep.size(); ++a) {
      const auto axis = result.config.sweep[a].axis;
      if (axis == Axis::Protocol) coords[to_string(axis)] = coord_string(axis, r.coords[a]);
      else coords[to_string(axis)] = inf_to_null(r.coords[a]);
    }
    rows.push_back({{"cell", r.cell},
                    {"seed", r.seed},
                    {"sender", r.sender},
                    {"receiver", r.receiver},
                    {"routers", r.routers},
                    {"coords", coords},
                    {"frames_generated", r.frames_generated},
                    {"frames_delivered", r.frames_delivered},
                    {"frames_excluded_by_stl", r.frames_excluded_by_stl},
                    {"frames_discarded", r.frames_discarded},
                    {"N", r.n_routed},
                    {"N0", r.n_sent},
                    {"avg_eta_tot", r.avg_eta_tot},
                    {"mean_storage_s", r.mean_storage},
                    {"rate_per_sent", r.rate_per_sent},
                    {"ell", r.ell},
                    {"best", r.best ? to_json(*r.best) : nlohmann::json()},
                    {"reason", r.reason}});
  }
  return rows;
}

ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioConfigError("invalid JSON in '" + path.string() + "': " + e.what());
  }
  if (j.is_object() && j.contains("config") && j.contains("tool")) j = j.at("config");
  return scenario_from_json(j, path.parent_path());
}

// Preset grids. Times are given in microseconds and converted on the way in.
namespace {

std::vector<double> us(std::initializer_list<double> v) {
  std::vector<double> out;
  for (double x : v) out.push_back(x * kMicro);
  return out;
}

std::vector<double> us_range(double from, double to, double step) {
  std::vector<double> out;
  for (double x = from; x <= to + 1e-9; x += step) out.push_back(x * kMicro);
  return out;
}

ScenarioConfig base_preset(const std::string& name, std::uint64_t frames_per_pair, double scale) {
  ScenarioConfig c;
  c.name = name;
  c.frames_per_pair = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(frames_per_pair * scale)));
  c.pairs = default_pairs();
  c.output = name;
  return c;
}

ScenarioConfig traffic(ScenarioConfig c, double interarrival_us, double frame_us, double guard_us) {
  c.sim.mean_interarrival = interarrival_us * kMicro;
  c.sim.initial_frame_length = frame_us * kMicro;
  c.sim.initial_guard_time = guard_us * kMicro;
  return c;
}

const double kNoStorage = static_cast<double>(ProtocolKind::NoStorage);
const double kUnlimited = static_cast<double>(ProtocolKind::StorageUnlimited);

}  // namespace

std::vector<std::string> preset_names() { return {"fig4", "fig5", "fig6", "fig7", "fig8"}; }

std::vector<ScenarioConfig> preset(const std::string& name, double scale) {
  if (!(scale > 0.0)) throw ScenarioConfigError("scale: must be > 0");
  std::vector<ScenarioConfig> out;
  const std::vector<double> interarrivals = us({3000, 5000, 10000, 15000, 20000, 30000});

  if (name == "fig4") {
    auto a = base_preset("fig4_frame_length", 18750, scale);
    a.sim.protocol = RoutingProtocol::no_storage();
    a.sim.initial_guard_time = 0.0;
    a.sweep = {{Axis::InitialFrameLength, us({200, 500, 1000, 2000, 5000, 10000})},
               {Axis::MeanInterarrival, interarrivals}};
    out.push_back(a);
    auto b = base_preset("fig4_guard_time", 18750, scale);
    b.sim.protocol = RoutingProtocol::no_storage();
    b.sim.initial_frame_length = 2000 * kMicro;
    b.sweep = {{Axis::InitialGuardTime, us({0, 200, 400, 800, 1200, 1600})},
               {Axis::MeanInterarrival, interarrivals}};
    out.push_back(b);
  } else if (name == "fig5" || name == "fig6") {
    const struct {
      const char* tag;
      double interarrival, frame, guard;
    } panels[] = {{"a", 30000, 2000, 0}, {"b", 30000, 2000, 800}, {"c", 3000, 200, 0}, {"d", 3000, 200, 80}};
    for (const auto& p : panels) {
      auto c = traffic(base_preset(name + p.tag, 37500, scale), p.interarrival, p.frame, p.guard);
      if (name == "fig5") {
        c.sweep = {{Axis::Protocol, {kNoStorage, kUnlimited}},
                   {Axis::StorageAttenuation, {0.001, 0.002, 0.003, 0.005, 0.01, 0.02, 0.03, 0.05, 0.1, 0.16, 0.2, 0.3}}};
      } else {
        c.sim.protocol = RoutingProtocol::storage_unlimited();
        c.sim.storage_attenuation_db_per_km = 0.16;
        c.sweep = {{Axis::PostprocessStl, p.frame > 1000 ? us_range(0, 1200, 50) : us_range(0, 600, 25)}};
      }
      out.push_back(std::move(c));
    }
  } else if (name == "fig7") {
    for (auto [tag, interarrival, frame] : {std::tuple{"a", 30000.0, 2000.0}, std::tuple{"b", 3000.0, 200.0}}) {
      auto c = traffic(base_preset(std::string("fig7") + tag, 37500, scale), interarrival, frame, 0);
      c.sim.protocol = RoutingProtocol::storage_unlimited();
      c.histogram_bin = 25 * kMicro;
      out.push_back(std::move(c));
    }
  } else if (name == "fig8") {
    struct Panel {
      const char* tag;
      double frame;
      std::optional<double> interarrival;  // fixed 1/gamma, STL swept
      std::optional<double> stl;           // fixed STL, 1/gamma swept
      std::vector<double> sweep_values;
    };
    const Panel panels[] = {
        {"a", 2000, 15000, std::nullopt, us_range(100, 800, 50)},
        {"b", 2000, std::nullopt, 320, us({5000, 7500, 10000, 15000, 20000, 30000})},
        {"c", 10000, 50000, std::nullopt, us_range(100, 1500, 100)},
        {"d", 10000, std::nullopt, 550, us({25000, 37500, 50000, 75000, 100000, 150000})},
    };
    for (const auto& p : panels) {
      for (bool enroute : {true, false}) {
        auto c = base_preset(std::string("fig8") + p.tag + (enroute ? "_limited" : "_postprocess"), 37500, scale);
        c.sim.initial_frame_length = p.frame * kMicro;
        c.sim.initial_guard_time = 0.0;
        c.sim.storage_attenuation_db_per_km = 0.16;
        c.sim.protocol = enroute ? RoutingProtocol::storage_limited(kInf) : RoutingProtocol::storage_unlimited();
        const Axis stl_axis = enroute ? Axis::Stl : Axis::PostprocessStl;
        if (p.interarrival) {
          c.sim.mean_interarrival = *p.interarrival * kMicro;
          c.sweep = {{stl_axis, p.sweep_values}};
        } else {
          if (enroute) c.sim.protocol.stl = *p.stl * kMicro;
          else c.postprocess_stl = *p.stl * kMicro;
          c.sweep = {{Axis::MeanInterarrival, p.sweep_values}};
        }
        out.push_back(std::move(c));
      }
    }
  } else {
    throw UnknownPreset("unknown preset '" + name + "'");
  }
  return out;
}

}  // namespace qkdnet
