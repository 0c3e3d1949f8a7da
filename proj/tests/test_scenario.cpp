#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "qkdnet/scenario.hpp"

using namespace qkdnet;

namespace {

ScenarioConfig small() {
  ScenarioConfig c;
  c.name = "small";
  c.frames_per_pair = 40;
  c.sim.mean_interarrival = 3e-3;
  c.sim.initial_frame_length = 2e-3;
  c.pairs = default_pairs();
  c.opt.grid_points_per_axis = 3;
  return c;
}

std::string csv(const ScenarioResult& r) {
  std::ostringstream os;
  write_rows_csv(os, r);
  return os.str();
}

}  // namespace

TEST_CASE("empty sweep gives one row per pair") {
  const auto r = run_scenario(small());
  CHECK(r.rows.size() == 3);
  for (const auto& row : r.rows) CHECK(row.cell == 0);
  CHECK(r.rows[0].routers == 1);
  CHECK(r.rows[1].routers == 2);
  CHECK(r.rows[2].routers == 3);
}

TEST_CASE("row count is pairs times the product of axis lengths") {
  auto c = small();
  c.sweep = {{Axis::Protocol, {0, 1}}, {Axis::StorageAttenuation, {0.01, 0.16, 0.3}}};
  const auto r = run_scenario(c);
  CHECK(r.rows.size() == 3 * 2 * 3);
  // attenuation is a post-processing axis: one run per protocol
  CHECK(r.group_seeds.size() == 2);
  CHECK(r.cell_group[0] == r.cell_group[2]);
  CHECK(r.cell_group[0] != r.cell_group[3]);
}

TEST_CASE("zero-rate rows carry a reason") {
  auto c = small();
  c.sim.initial_frame_length = 2e-4;
  c.sim.mean_interarrival = 3e-3;
  const auto r = run_scenario(c);
  for (const auto& row : r.rows)
    if (row.rate_per_sent == 0.0) CHECK_FALSE(row.reason.empty());
}

TEST_CASE("reruns are byte identical, also across worker counts") {
  auto c = small();
  c.sweep = {{Axis::MeanInterarrival, {3e-3, 1e-2}}, {Axis::PostprocessStl, {2e-4, 1e-3}}};
  const std::string a = csv(run_scenario(c, 1));
  const std::string b = csv(run_scenario(c, 1));
  const std::string d = csv(run_scenario(c, 3));
  CHECK(a == b);
  CHECK(a == d);
}

TEST_CASE("json round trip and manifest reload") {
  auto c = small();
  c.sweep = {{Axis::Stl, {1e-4, std::numeric_limits<double>::infinity()}}, {Axis::Protocol, {2}}};
  const auto j = scenario_to_json(c);
  const auto back = scenario_from_json(j);
  CHECK(scenario_to_json(back) == j);
  CHECK(std::isinf(back.sweep[0].values[1]));

  const auto r = run_scenario(c);
  const auto m = manifest(r);
  CHECK(m["version"] == kVersion);
  CHECK(m["group_seeds"].size() == r.group_seeds.size());
  const auto reloaded = scenario_from_json(m["config"]);
  CHECK(csv(run_scenario(reloaded)) == csv(r));
}

TEST_CASE("invalid configs name the offending field") {
  auto expect_field = [](const nlohmann::json& j, const std::string& field) {
    try {
      scenario_from_json(j);
      FAIL("expected ScenarioConfigError");
    } catch (const ScenarioConfigError& e) {
      INFO(std::string(e.what()));
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  expect_field({{"sweep", {{{"axis", "colour"}, {"values", {1}}}}}}, "sweep.axis");
  expect_field({{"sweep", {{{"axis", "stl"}, {"values", nlohmann::json::array()}}}}}, "sweep[0]");
  expect_field({{"sim", {{"d_proc", -1}}}}, "sim.d_proc");
  expect_field({{"pairs", nlohmann::json::array({nlohmann::json::array({"B11", "A11"})})}}, "pairs[0]");
  expect_field({{"pairs", nlohmann::json::array({"A11"})}}, "pairs[0]");
}

TEST_CASE("derived seeds are distinct and stable") {
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("presets reproduce the published grids") {
  CHECK_THROWS_AS(preset("fig9"), UnknownPreset);

  const auto fig4 = preset("fig4");
  REQUIRE(fig4.size() == 2);
  CHECK(*fig4[0].frames_per_pair == 18750);
  CHECK(fig4[0].sim.protocol.kind == ProtocolKind::NoStorage);
  CHECK(*preset("fig4", 0.2)[0].frames_per_pair == 3750);

  const auto fig5 = preset("fig5");
  REQUIRE(fig5.size() == 4);
  for (const auto& c : fig5) {
    CHECK(*c.frames_per_pair == 37500);
    const auto it = std::find_if(c.sweep.begin(), c.sweep.end(),
                                 [](const SweepAxis& a) { return a.axis == Axis::StorageAttenuation; });
    REQUIRE(it != c.sweep.end());
    CHECK(*std::min_element(it->values.begin(), it->values.end()) <= 1e-3);
    CHECK(*std::max_element(it->values.begin(), it->values.end()) >= 0.3);
  }

  bool has_320 = false, has_550 = false;
  for (const auto& c : preset("fig8")) {
    if (c.sim.initial_frame_length == 2e-3 &&
        (std::abs(c.sim.protocol.stl - 320e-6) < 1e-12 || std::abs(c.postprocess_stl - 320e-6) < 1e-12))
      has_320 = true;
    if (c.sim.initial_frame_length == 1e-2 &&
        (std::abs(c.sim.protocol.stl - 550e-6) < 1e-12 || std::abs(c.postprocess_stl - 550e-6) < 1e-12))
      has_550 = true;
  }
  CHECK(has_320);
  CHECK(has_550);

  for (const auto& name : preset_names())
    for (const auto& c : preset(name, 0.01)) CHECK_NOTHROW(c.validate());
}

TEST_CASE("histogram csv is emitted when a bin is configured") {
  auto c = small();
  c.histogram_bin = 25e-6;
  c.sim.protocol = RoutingProtocol::storage_unlimited();
  const auto r = run_scenario(c);
  REQUIRE(r.histograms.size() == 1);
  std::ostringstream os;
  write_histograms_csv(os, r);
  CHECK(os.str().rfind("group,routers,bin_start_s,bin_end_s,fraction,frames\n", 0) == 0);
}
