#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hamd/bench.hpp"

using namespace hamd;
namespace fs = std::filesystem;

namespace {

ResultRecord rec(const std::string& solver, std::uint64_t seed, double objective) {
  ResultRecord r;
  r.kind = "multiseed";
  r.n = 200;
  r.k = 40;
  r.instance_seed = 42;
  r.seed = seed;
  r.solver = solver;
  r.mode = solver == "hamd" ? "full" : "";
  r.objective = objective;
  return r;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hamd_bench_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("aggregate reproduces the multi-seed example") {
  std::vector<ResultRecord> rs;
  const std::vector<double> sa{1621.60, 1026.08, 1208.07};
  for (std::size_t i = 0; i < 3; ++i) {
    rs.push_back(rec("hamd", kDefaultSeeds[i], 195.65));
    rs.push_back(rec("sa", kDefaultSeeds[i], sa[i]));
  }
  const auto s = aggregate(rs);
  CHECK(s.n == 200);
  REQUIRE(s.series.size() == 2);
  const auto& sa_stats = s.series[1];
  CHECK(sa_stats.label == "sa");
  CHECK(sa_stats.median == 1208.07);
  CHECK(sa_stats.stddev == doctest::Approx(249.17).epsilon(1e-4));
  CHECK(sa_stats.seeds == kDefaultSeeds);
  CHECK(s.series[0].stddev == 0.0);
  REQUIRE(s.pairwise.size() == 1);
  CHECK(s.pairwise[0].wins == 0);
  CHECK(s.pairwise[0].ties == 0);
  CHECK(s.pairwise[0].losses == 3);
  CHECK(std::round(s.pairwise[0].median_gap * 1000.0) / 10.0 == 83.8);
}

TEST_CASE("identical series tie and single records have zero spread") {
  std::vector<ResultRecord> rs;
  for (auto seed : kDefaultSeeds) {
    rs.push_back(rec("hamd", seed, 10.0 + seed));
    rs.push_back(rec("tabu", seed, 10.0 + seed));
  }
  const auto s = aggregate(rs);
  CHECK(s.pairwise[0].ties == 3);
  CHECK(s.pairwise[0].median_gap == 0.0);

  const auto one = aggregate({rec("hamd", 1, 7.5), rec("sa", 1, 9.0)});
  CHECK(one.series[0].median == 7.5);
  CHECK(one.series[0].stddev == 0.0);
  CHECK(one.pairwise[0].losses == 1);

  CHECK(values_tie(1e12, 1e12 + 1.0));
  CHECK_FALSE(values_tie(1.0, 1.0 + 1e-8));
  CHECK(median({3.0, 1.0, 2.0, 10.0}) == 2.5);
  CHECK(population_stddev({2.0, 4.0}) == 1.0);
}

TEST_CASE("aggregate rejects inconsistent inputs") {
  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate({rec("hamd", 1, 1.0), rec("sa", 2, 1.0)}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate({rec("hamd", 1, 1.0), rec("hamd", 1, 2.0)}), std::invalid_argument);
  auto other = rec("sa", 1, 1.0);
  other.n = 300;
  CHECK_THROWS_AS(aggregate({rec("hamd", 1, 1.0), other}), std::invalid_argument);
}

TEST_CASE("record JSON round trip") {
  auto r = rec("sa", 1042, -12.345678901234567);
  r.multiplier = 0.5;
  r.lambda_k = 1234.5;
  r.selection = {1, 5, 9};
  r.cardinality = 3;
  r.ttt = {1.0, 2.0, 3.0, 4.0, 5.0};
  r.feasibility = FeasibilityRecord{};
  r.feasibility->card_violation = 2;
  r.config = {{"sweeps", 10}};
  r.warnings = {"w"};
  r.wall_seconds = 1.25;
  const auto text = serialize_record(r);
  const auto back = record_from_json(nlohmann::json::parse(text));
  CHECK(serialize_record(back) == text);
  CHECK(back.objective == r.objective);
  CHECK(back.feasibility->card_violation == 2);
  CHECK(back.label() == "sa@0.5x");
  CHECK(nlohmann::json::parse(text).at("schema") == kResultSchema);
  CHECK_THROWS(record_from_json(nlohmann::json{{"schema", "other"}}));
}

TEST_CASE("report formats") {
  std::vector<ResultRecord> rs;
  for (auto seed : kDefaultSeeds) {
    rs.push_back(rec("hamd", seed, 195.65));
    rs.push_back(rec("sa", seed, 1000.0 + static_cast<double>(seed) / 7.0));
  }
  const auto csv = render_report(rs, ReportFormat::Csv);
  REQUIRE(csv.count("multiseed"));
  const auto rows = parse_csv(csv.at("multiseed"));
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) CHECK(row.size() == rows[0].size());
  // Full precision survives the CSV trip.
  const auto runs = parse_csv(csv.at("runs"));
  bool found = false;
  for (const auto& row : runs) {
    for (const auto& cell : row) found = found || (!cell.empty() && std::isdigit(cell[0]) && std::stod(cell) == rs[1].objective);
  }
  CHECK(found);

  const auto text = render_report(rs, ReportFormat::Text);
  CHECK(text.at("multiseed").find("+") != std::string::npos);
  CHECK(text.at("multiseed").find("195.65") != std::string::npos);
  CHECK(parse_format("csv") == ReportFormat::Csv);
  CHECK(parse_format("table-text") == ReportFormat::Text);
  CHECK_THROWS(parse_format("xml"));
  CHECK_THROWS(render_report({}, ReportFormat::Csv));
  CHECK(parse_csv("a,\"b,c\",\"d\"\"e\"\n") == std::vector<std::vector<std::string>>{{"a", "b,c", "d\"e"}});
}

TEST_CASE("spec validation and defaults") {
  CHECK(default_spec(ExperimentKind::Scaling).sizes.size() == 4);
  CHECK(default_spec(ExperimentKind::Sensitivity).multipliers == std::vector<double>{0.5, 1.0, 2.0});
  CHECK(default_spec(ExperimentKind::Ablation).modes.size() == 4);
  for (auto k : {ExperimentKind::Scaling, ExperimentKind::Multiseed, ExperimentKind::Ablation,
                 ExperimentKind::Sensitivity, ExperimentKind::Exact, ExperimentKind::Single}) {
    CHECK_NOTHROW(default_spec(k).validate());
    CHECK(parse_kind(to_string(k)) == k);
  }
  auto bad = default_spec(ExperimentKind::Multiseed);
  bad.multipliers = {2.0};
  CHECK_THROWS(bad.validate());
  bad = default_spec(ExperimentKind::Multiseed);
  bad.solvers = {"annealer"};
  CHECK_THROWS(bad.validate());
  bad = default_spec(ExperimentKind::Multiseed);
  bad.seeds.clear();
  CHECK_THROWS(bad.validate());
  CHECK_THROWS(parse_kind("nope"));
}

TEST_CASE("fixed-iteration experiments are byte-reproducible") {
  auto spec = default_spec(ExperimentKind::Multiseed);
  spec.sizes = {{30, 6}};
  spec.budget = Budget::iterations(200);
  spec.random_trials = 50;
  const auto dir_a = scratch("a");
  const auto dir_b = scratch("b");
  spec.out_dir = dir_a;
  const auto a = run_experiment(spec);
  CHECK(a.records.size() == 9);
  spec.out_dir = dir_b;
  spec.workers = 2;
  run_experiment(spec);
  const auto ta = tree(dir_a);
  const auto tb = tree(dir_b);
  CHECK(ta.size() == tb.size());
  CHECK(ta == tb);
  CHECK(ta.count("multiseed.csv"));
  CHECK(ta.count("multiseed.txt"));
  const auto loaded = load_records(spec.out_dir / "records");
  CHECK(loaded.size() == 9);
  for (const auto& r : loaded) {
    CHECK_FALSE(r.wall_seconds.has_value());
    CHECK(r.cardinality == 6);
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("run_single records") {
  const auto inst = generate_instance(30, 6, 7);
  SingleRun run;
  run.solver = "tabu";
  run.budget = Budget::iterations(50);
  run.random_trials = 20;
  std::vector<std::uint8_t> raw;
  const auto r = run_single(inst, run, &raw);
  CHECK(r.kind == "single");
  CHECK(r.feasibility.has_value());
  CHECK(raw.size() == 30 + inst.triples.size());
  CHECK(r.lambda_k > 0.0);
  run.solver = "hamd";
  const auto h = run_single(inst, run);
  CHECK(h.restarts.has_value());
  CHECK(h.cardinality == 6);
  CHECK_FALSE(h.feasibility.has_value());
}
