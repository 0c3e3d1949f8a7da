#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qkdnet/chanstats.hpp"
#include "qkdnet/keyrate.hpp"
#include "qkdnet/netsim.hpp"
#include "qkdnet/optimizer.hpp"
#include "qkdnet/topology.hpp"

namespace qkdnet {

inline constexpr const char* kVersion = "0.3.0";

/// Parameters a sweep may vary. Simulation axes trigger a new DES run;
/// post-processing axes reuse the run of their simulation group.
enum class Axis {
  MeanInterarrival,
  InitialFrameLength,
  InitialGuardTime,
  StorageAttenuation,
  Stl,
  PostprocessStl,
  Protocol,
};

const char* to_string(Axis a);
Axis axis_from_string(const std::string& s);
bool is_simulation_axis(Axis a);

/// Protocol axis values are encoded as ProtocolKind cast to double.
struct SweepAxis {
  Axis axis = Axis::MeanInterarrival;
  std::vector<double> values;
};

struct PairSpec {
  std::string sender;
  std::string receiver;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::optional<nlohmann::json> topology;  // inline topology; default network when empty
  SimConfig sim;
  // When set, frames_per_sender = receivers * frames_per_pair.
  std::optional<std::uint64_t> frames_per_pair;
  double postprocess_stl = std::numeric_limits<double>::infinity();
  std::vector<SweepAxis> sweep;
  std::vector<PairSpec> pairs;  // default: one pair per router separation 1, 2, 3
  SecurityParams security;
  OptSettings opt;
  EtaAveraging averaging = EtaAveraging::LogDomain;
  std::optional<double> histogram_bin;  // emit storage histograms when set
  std::string output = "out";

  void validate() const;
  std::size_t cell_count() const;
};

class ScenarioConfigError : public ConfigInvalid {
 public:
  using ConfigInvalid::ConfigInvalid;
};

class UnknownPreset : public ScenarioConfigError {
 public:
  using ScenarioConfigError::ScenarioConfigError;
};

ScenarioConfig scenario_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
nlohmann::json scenario_to_json(const ScenarioConfig& c);

std::vector<PairSpec> default_pairs();

/// Published parameter grids, with frame counts multiplied by scale.
std::vector<ScenarioConfig> preset(const std::string& name, double scale = 1.0);
std::vector<std::string> preset_names();

/// Counter-based seed for stream index under a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

struct ResultRow {
  std::size_t cell = 0;
  std::size_t group = 0;
  std::uint64_t seed = 0;
  std::string sender;
  std::string receiver;
  std::size_t routers = 0;
  std::vector<double> coords;  // one per sweep axis
  std::uint64_t frames_generated = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t frames_excluded_by_stl = 0;
  std::uint64_t frames_discarded = 0;
  double n_routed = 0.0;
  double n_sent = 0.0;
  double avg_eta_tot = 0.0;
  double mean_storage = 0.0;
  double rate_per_sent = 0.0;
  double ell = 0.0;
  std::optional<ProtocolParams> best;
  std::string reason;  // empty when rate_per_sent > 0
};

struct HistogramBlock {
  std::size_t group = 0;
  StorageHistogram histogram;
};

struct ScenarioResult {
  ScenarioConfig config;
  std::vector<ResultRow> rows;
  std::vector<std::uint64_t> group_seeds;
  std::vector<std::size_t> cell_group;
  std::vector<HistogramBlock> histograms;
  std::size_t failed_cells = 0;
};

ScenarioResult run_scenario(const ScenarioConfig& config, unsigned workers = 1);

void write_rows_csv(std::ostream& out, const ScenarioResult& result);
void write_histograms_csv(std::ostream& out, const ScenarioResult& result);
nlohmann::json manifest(const ScenarioResult& result);
nlohmann::json rows_to_json(const ScenarioResult& result);

/// Loads either a scenario config or a manifest produced by a previous run.
ScenarioConfig load_scenario_file(const std::filesystem::path& path);

}  // namespace qkdnet
