#include "hamd/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "hamd/baselines.hpp"
#include "hamd/native_model.hpp"
#include "hamd/quadratizer.hpp"

namespace hamd {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Scaling: return "scaling";
    case ExperimentKind::Multiseed: return "multiseed";
    case ExperimentKind::Ablation: return "ablation";
    case ExperimentKind::Sensitivity: return "sensitivity";
    case ExperimentKind::Exact: return "exact";
    case ExperimentKind::Single: return "single";
  }
  return "single";
}

ExperimentKind parse_kind(const std::string& name) {
  for (auto kind : {ExperimentKind::Scaling, ExperimentKind::Multiseed, ExperimentKind::Ablation,
                    ExperimentKind::Sensitivity, ExperimentKind::Exact, ExperimentKind::Single}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown experiment kind: " + name);
}

void ExperimentSpec::validate() const {
  if (sizes.empty()) throw std::invalid_argument("ExperimentSpec: sizes must be non-empty");
  if (seeds.empty()) throw std::invalid_argument("ExperimentSpec: seeds must be non-empty");
  for (const auto& s : sizes) {
    if (s.n < 2 || s.k < 1 || s.k >= s.n) {
      throw std::invalid_argument(fmt::format("ExperimentSpec: invalid size n={} K={}", s.n, s.k));
    }
  }
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw std::invalid_argument("ExperimentSpec: duplicate seeds");
  }
  if (!(budget.amount > 0.0)) throw std::invalid_argument("ExperimentSpec: budget must be positive");
  if (multipliers.empty()) throw std::invalid_argument("ExperimentSpec: multipliers must be non-empty");
  if (kind != ExperimentKind::Sensitivity && !(multipliers.size() == 1 && multipliers[0] == 1.0)) {
    throw std::invalid_argument("ExperimentSpec: multipliers are only valid for kind=sensitivity");
  }
  for (double m : multipliers) {
    if (!(m > 0.0)) throw std::invalid_argument("ExperimentSpec: multipliers must be positive");
  }
  if (solvers.empty()) throw std::invalid_argument("ExperimentSpec: solver set must be non-empty");
  for (const auto& s : solvers) {
    if (s != "hamd" && s != "sa" && s != "tabu") throw std::invalid_argument("ExperimentSpec: unknown solver " + s);
  }
  if (std::set<std::string>(solvers.begin(), solvers.end()).size() != solvers.size()) {
    throw std::invalid_argument("ExperimentSpec: duplicate solvers");
  }
  if (modes.empty()) throw std::invalid_argument("ExperimentSpec: modes must be non-empty");
  if (random_trials < 1) throw std::invalid_argument("ExperimentSpec: random_trials must be >= 1");
  if (workers < 1) throw std::invalid_argument("ExperimentSpec: workers must be >= 1");
}

ExperimentSpec default_spec(ExperimentKind kind) {
  ExperimentSpec s;
  s.kind = kind;
  switch (kind) {
    case ExperimentKind::Scaling:
      s.sizes = {{200, 40}, {300, 60}, {500, 100}, {1000, 200}};
      s.seeds = {42};
      break;
    case ExperimentKind::Multiseed:
      s.sizes = {{200, 40}};
      s.seeds = kDefaultSeeds;
      s.instance_seed = 42;
      break;
    case ExperimentKind::Ablation:
      s.sizes = {{200, 40}};
      s.seeds = {42};
      s.instance_seed = 42;
      s.solvers = {"hamd"};
      s.modes = {Mode::Cont, Mode::Proj, Mode::Polish, Mode::Full};
      break;
    case ExperimentKind::Sensitivity:
      s.sizes = {{200, 40}};
      s.seeds = kDefaultSeeds;
      s.instance_seed = 42;
      s.multipliers = {0.5, 1.0, 2.0};
      break;
    case ExperimentKind::Exact:
      s.sizes = {{20, 4}, {25, 5}, {30, 6}};
      s.seeds = kDefaultSeeds;
      s.solvers = {"hamd"};
      s.budget = Budget::seconds(10.0);
      break;
    case ExperimentKind::Single:
      s.sizes = {{200, 40}};
      s.seeds = {42};
      break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Records

std::string ResultRecord::label() const {
  if (solver == "hamd") return mode == "full" || mode.empty() ? "hamd" : "hamd-" + mode;
  if (multiplier == 1.0) return solver;
  return fmt::format("{}@{}x", solver, multiplier);
}

std::string ResultRecord::file_stem() const {
  const std::string variant = solver == "hamd" ? mode : fmt::format("m{}", multiplier);
  return fmt::format("{}_n{}_k{}_inst{}_seed{}_{}_{}", kind, n, k, instance_seed, seed, solver, variant);
}

namespace {

json budget_json(const Budget& b) {
  return json{{"kind", b.fixed() ? "iterations" : "seconds"}, {"amount", b.amount}};
}

Budget budget_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "iterations") return Budget{Budget::Kind::Iterations, j.at("amount").get<double>()};
  if (kind == "seconds") return Budget{Budget::Kind::Seconds, j.at("amount").get<double>()};
  throw std::invalid_argument("unknown budget kind: " + kind);
}

// JSON has no infinity; an infinite penalty fraction is written as a string.
json real_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double real_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

FeasibilityRecord feasibility_from_json(const json& j) {
  FeasibilityRecord f;
  f.augmented_matrix_energy = j.at("augmented_matrix_energy").get<double>();
  f.decoded_native_objective = j.at("decoded_native_objective").get<double>();
  f.cardinality = j.at("cardinality").get<std::size_t>();
  f.card_violation = j.at("card_violation").get<std::size_t>();
  f.aux_viol_count = j.at("aux_viol_count").get<std::size_t>();
  f.aux_viol_rate = j.at("aux_viol_rate").get<double>();
  f.false_positive_count = j.at("false_positive_count").get<std::size_t>();
  f.false_negative_count = j.at("false_negative_count").get<std::size_t>();
  f.card_penalty = j.at("card_penalty").get<double>();
  f.rosenberg_penalty = j.at("rosenberg_penalty").get<double>();
  f.penalty_fraction = real_from_json(j.at("penalty_fraction"));
  return f;
}

json hamd_config_json(const HamdConfig& c, std::uint64_t seed) {
  return json{{"batch_size", c.batch_size},
              {"ils_fraction", c.ils_fraction},
              {"damping", c.damping},
              {"step_size", c.step_size},
              {"transverse_weight", c.transverse_weight},
              {"epsilon", c.epsilon},
              {"restitution", c.restitution},
              {"gradient_clip", c.gradient_clip},
              {"stall_window", c.stall_window},
              {"stall_tolerance", c.stall_tolerance},
              {"max_age", c.max_age},
              {"snap_interval", c.snap_interval},
              {"mode", to_string(c.mode)},
              {"budget", budget_json(c.budget)},
              {"seed", seed}};
}

}  // namespace

json to_json(const FeasibilityRecord& f) {
  return json{{"augmented_matrix_energy", f.augmented_matrix_energy},
              {"decoded_native_objective", f.decoded_native_objective},
              {"cardinality", f.cardinality},
              {"card_violation", f.card_violation},
              {"aux_viol_count", f.aux_viol_count},
              {"aux_viol_rate", f.aux_viol_rate},
              {"false_positive_count", f.false_positive_count},
              {"false_negative_count", f.false_negative_count},
              {"card_penalty", f.card_penalty},
              {"rosenberg_penalty", f.rosenberg_penalty},
              {"penalty_fraction", real_json(f.penalty_fraction)}};
}

json to_json(const ResultRecord& r) {
  json j;
  j["schema"] = kResultSchema;
  j["kind"] = r.kind;
  j["instance"] = json{{"n", r.n}, {"k", r.k}, {"seed", r.instance_seed}, {"triples", r.triples}};
  j["seed"] = r.seed;
  j["solver"] = r.solver;
  j["label"] = r.label();
  if (!r.mode.empty()) j["mode"] = r.mode;
  j["lambda_multiplier"] = r.multiplier;
  if (r.solver != "hamd") j["lambda_k"] = r.lambda_k;
  j["config"] = r.config;
  j["budget"] = budget_json(r.budget);
  j["objective"] = r.objective;
  j["cardinality"] = r.cardinality;
  j["selection"] = r.selection;
  json ttt = json::array();
  for (std::size_t i = 0; i < kTttFractions.size(); ++i) {
    ttt.push_back(json{{"fraction", kTttFractions[i]}, {"best", real_json(r.ttt[i])}});
  }
  j["ttt"] = ttt;
  if (r.feasibility) j["feasibility"] = to_json(*r.feasibility);
  if (r.restarts) j["restarts"] = *r.restarts;
  if (r.ils_steps) j["ils_steps"] = *r.ils_steps;
  j["iterations"] = r.iterations;
  j["random_reference"] = r.random_reference;
  if (r.optimum) j["optimum"] = *r.optimum;
  if (r.enumerated) j["enumerated"] = *r.enumerated;
  if (r.wall_seconds) j["wall_seconds"] = *r.wall_seconds;
  if (r.enumeration_seconds) j["enumeration_seconds"] = *r.enumeration_seconds;
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

ResultRecord record_from_json(const json& j) {
  if (j.value("schema", std::string{}) != kResultSchema) {
    throw std::invalid_argument("record: unsupported schema");
  }
  ResultRecord r;
  r.kind = j.at("kind").get<std::string>();
  const auto& inst = j.at("instance");
  r.n = inst.at("n").get<std::size_t>();
  r.k = inst.at("k").get<std::size_t>();
  r.instance_seed = inst.at("seed").get<std::uint64_t>();
  r.triples = inst.at("triples").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.solver = j.at("solver").get<std::string>();
  r.mode = j.value("mode", std::string{});
  r.multiplier = j.at("lambda_multiplier").get<double>();
  r.lambda_k = j.value("lambda_k", 0.0);
  r.config = j.at("config");
  r.budget = budget_from_json(j.at("budget"));
  r.objective = j.at("objective").get<double>();
  r.cardinality = j.at("cardinality").get<std::size_t>();
  r.selection = j.at("selection").get<std::vector<std::size_t>>();
  const auto& ttt = j.at("ttt");
  if (ttt.size() != kTttFractions.size()) throw std::invalid_argument("record: expected 5 TTT samples");
  for (std::size_t i = 0; i < kTttFractions.size(); ++i) {
    if (ttt[i].at("fraction").get<double>() != kTttFractions[i]) {
      throw std::invalid_argument("record: unexpected TTT fraction");
    }
    r.ttt[i] = real_from_json(ttt[i].at("best"));
  }
  if (j.contains("feasibility")) r.feasibility = feasibility_from_json(j.at("feasibility"));
  if (j.contains("restarts")) r.restarts = j.at("restarts").get<std::uint64_t>();
  if (j.contains("ils_steps")) r.ils_steps = j.at("ils_steps").get<std::uint64_t>();
  r.iterations = j.at("iterations").get<std::uint64_t>();
  r.random_reference = j.at("random_reference").get<double>();
  if (j.contains("optimum")) r.optimum = j.at("optimum").get<double>();
  if (j.contains("enumerated")) r.enumerated = j.at("enumerated").get<std::uint64_t>();
  if (j.contains("wall_seconds")) r.wall_seconds = j.at("wall_seconds").get<double>();
  if (j.contains("enumeration_seconds")) r.enumeration_seconds = j.at("enumeration_seconds").get<double>();
  if (j.contains("warnings")) r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

std::string serialize_record(const ResultRecord& record) { return to_json(record).dump(2) + "\n"; }

std::vector<ResultRecord> load_records(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::vector<ResultRecord> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      out.push_back(record_from_json(json::parse(in)));
    } catch (const std::exception& e) {
      throw std::invalid_argument(f.string() + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment driver

namespace {

struct Cell {
  std::size_t instance_slot = 0;
  std::uint64_t seed = 0;
  std::string solver;
  Mode mode = Mode::Full;
  double multiplier = 1.0;
};

struct InstanceSlot {
  PortfolioInstance instance;
  double random_reference = 0.0;
  std::optional<OracleResult> oracle;
};

ResultRecord run_hamd_cell(const Budget& budget, const InstanceSlot& slot, const Cell& cell) {
  HamdConfig config;
  config.mode = cell.mode;
  config.budget = budget;
  const auto trace = solve(slot.instance, config, cell.seed);

  ResultRecord r;
  r.solver = "hamd";
  r.mode = to_string(cell.mode);
  r.config = hamd_config_json(config, cell.seed);
  r.objective = trace.final_objective;
  r.cardinality = trace.final_portfolio.cardinality();
  r.selection = trace.final_portfolio.chosen();
  r.ttt = trace.ttt();
  r.restarts = trace.restarts;
  r.ils_steps = trace.ils_steps;
  r.iterations = trace.dynamics_steps + trace.ils_steps;
  r.warnings = trace.warnings;
  if (!budget.fixed()) r.wall_seconds = trace.wall_seconds;
  return r;
}

ResultRecord run_baseline_cell(const Budget& budget, const InstanceSlot& slot, const AugmentedQubo& qubo,
                               const Cell& cell, std::vector<std::uint8_t>* best_state = nullptr) {
  BaselineResult res;
  json config;
  if (cell.solver == "sa") {
    AnnealConfig c;
    c.budget = budget;
    c.seed = cell.seed;
    res = sa_solve(qubo, c);
    config = json{{"initial_temperature", res.initial_temperature},
                  {"final_temperature", res.final_temperature},
                  {"temperature_calibration", c.initial_temperature > 0.0 ? "manual" : "auto"},
                  {"initial_acceptance", c.initial_acceptance},
                  {"final_acceptance", c.final_acceptance},
                  {"calibration_samples", c.calibration_samples},
                  {"cooling", "geometric"},
                  {"start", "zeros"}};
  } else {
    TabuConfig c;
    c.budget = budget;
    c.seed = cell.seed;
    res = tabu_solve(qubo, c);
    config = json{{"tenure", res.tenure}, {"aspiration", c.aspiration}, {"start", "zeros"}};
  }
  config["budget"] = budget_json(budget);
  config["seed"] = cell.seed;
  config["lambda_multiplier"] = cell.multiplier;
  config["lambda_r"] = qubo.lambda_r;

  const auto& inst = slot.instance;
  const auto dec = decode(qubo, res.best_state);
  const auto portfolio = Portfolio::from_bits(dec.x);

  ResultRecord r;
  r.solver = cell.solver;
  r.multiplier = cell.multiplier;
  r.lambda_k = qubo.lambda_k;
  r.config = std::move(config);
  r.objective = eval_native(inst, portfolio);
  r.cardinality = portfolio.cardinality();
  r.selection = portfolio.chosen();
  for (std::size_t i = 0; i < kTttFractions.size(); ++i) {
    const auto d = decode(qubo, res.ttt_states.at(i));
    r.ttt[i] = eval_native(inst, Portfolio::from_bits(d.x));
  }
  r.feasibility = feasibility_record(qubo, res.best_state, inst);
  r.iterations = res.iterations;
  if (!budget.fixed()) r.wall_seconds = res.wall_seconds;
  if (best_state) *best_state = res.best_state;
  return r;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

ResultRecord run_single(const PortfolioInstance& instance, const SingleRun& run,
                        std::vector<std::uint8_t>* augmented_state) {
  if (run.solver != "hamd" && run.solver != "sa" && run.solver != "tabu") {
    throw std::invalid_argument("unknown solver: " + run.solver);
  }
  if (!(run.multiplier > 0.0)) throw std::invalid_argument("lambda multiplier must be positive");
  instance.validate();
  InstanceSlot slot;
  slot.instance = instance;
  slot.random_reference = random_reference(instance, std::max<std::size_t>(1, run.random_trials), instance.seed);
  const Cell cell{0, run.seed, run.solver, run.mode, run.multiplier};
  ResultRecord r;
  if (run.solver == "hamd") {
    r = run_hamd_cell(run.budget, slot, cell);
  } else {
    const auto qubo = build_augmented(instance, run.multiplier);
    r = run_baseline_cell(run.budget, slot, qubo, cell, augmented_state);
  }
  r.kind = to_string(ExperimentKind::Single);
  r.n = instance.n;
  r.k = instance.k;
  r.instance_seed = instance.seed;
  r.triples = instance.triples.size();
  r.seed = run.seed;
  r.budget = run.budget;
  r.random_reference = slot.random_reference;
  return r;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.out_dir.empty()) throw std::invalid_argument("run_experiment: output path is empty");
  const fs::path record_dir = spec.out_dir / "records";
  std::error_code ec;
  fs::create_directories(record_dir, ec);
  if (ec || !fs::is_directory(record_dir)) {
    throw std::runtime_error("run_experiment: cannot create " + record_dir.string());
  }

  // Instances, keyed by (size, instance seed), in first-use order.
  std::vector<InstanceSlot> slots;
  std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>, std::size_t> slot_of;
  std::vector<Cell> cells;
  for (const auto& size : spec.sizes) {
    for (auto seed : spec.seeds) {
      const std::uint64_t iseed = spec.instance_seed.value_or(seed);
      const auto key = std::make_tuple(size.n, size.k, iseed);
      auto it = slot_of.find(key);
      if (it == slot_of.end()) {
        InstanceSlot slot;
        slot.instance = generate_instance(size.n, size.k, iseed);
        slot.random_reference = random_reference(slot.instance, spec.random_trials, iseed);
        if (spec.kind == ExperimentKind::Exact) slot.oracle = brute_force_optimum(slot.instance);
        it = slot_of.emplace(key, slots.size()).first;
        slots.push_back(std::move(slot));
      }
      for (const auto& solver : spec.solvers) {
        if (solver == "hamd") {
          for (auto mode : spec.modes) cells.push_back({it->second, seed, solver, mode, 1.0});
        } else {
          for (double m : spec.multipliers) cells.push_back({it->second, seed, solver, Mode::Full, m});
        }
      }
    }
  }

  std::map<std::pair<std::size_t, double>, AugmentedQubo> qubos;
  for (const auto& c : cells) {
    if (c.solver == "hamd") continue;
    const auto key = std::make_pair(c.instance_slot, c.multiplier);
    if (!qubos.count(key)) qubos.emplace(key, build_augmented(slots[c.instance_slot].instance, c.multiplier));
  }

  std::vector<ResultRecord> records(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        const auto& cell = cells[i];
        const auto& slot = slots[cell.instance_slot];
        ResultRecord r = cell.solver == "hamd"
                             ? run_hamd_cell(spec.budget, slot, cell)
                             : run_baseline_cell(spec.budget, slot, qubos.at({cell.instance_slot, cell.multiplier}), cell);
        r.kind = to_string(spec.kind);
        r.n = slot.instance.n;
        r.k = slot.instance.k;
        r.instance_seed = slot.instance.seed;
        r.triples = slot.instance.triples.size();
        r.seed = cell.seed;
        r.budget = spec.budget;
        r.random_reference = slot.random_reference;
        if (slot.oracle) {
          r.optimum = slot.oracle->value;
          r.enumerated = slot.oracle->visited;
          if (!spec.budget.fixed()) r.enumeration_seconds = slot.oracle->seconds;
        }
        records[i] = std::move(r);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(spec.workers, cells.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult result;
  for (const auto& r : records) {
    const auto path = record_dir / (r.file_stem() + ".json");
    write_file(path, serialize_record(r));
    result.written.push_back(path);
  }
  for (auto format : {ReportFormat::Csv, ReportFormat::Text}) {
    for (auto& p : write_report(records, format, spec.out_dir)) result.written.push_back(std::move(p));
  }
  result.records = std::move(records);
  return result;
}

// ---------------------------------------------------------------------------
// Aggregation

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

double population_stddev(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("stddev of an empty set");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

bool values_tie(double a, double b) {
  return std::abs(a - b) <= kTieTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

Summary aggregate(const std::vector<ResultRecord>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  Summary s;
  s.n = records.front().n;
  s.k = records.front().k;
  std::map<std::string, std::map<std::uint64_t, double>> by_label;
  for (const auto& r : records) {
    if (r.n != s.n || r.k != s.k) throw std::invalid_argument("aggregate: records span several (n, K)");
    auto& series = by_label[r.label()];
    if (!series.emplace(r.seed, r.objective).second) {
      throw std::invalid_argument("aggregate: duplicate seed " + std::to_string(r.seed) + " for " + r.label());
    }
  }
  for (const auto& [label, values] : by_label) {
    SeriesStats st;
    st.label = label;
    for (const auto& [seed, v] : values) {
      st.seeds.push_back(seed);
      st.values.push_back(v);
    }
    st.median = median(st.values);
    st.stddev = population_stddev(st.values);
    s.series.push_back(std::move(st));
  }

  const auto hamd = by_label.find("hamd");
  if (hamd == by_label.end()) return s;
  for (const auto& [label, values] : by_label) {
    if (label.rfind("hamd", 0) == 0) continue;
    if (values.size() != hamd->second.size() ||
        !std::equal(values.begin(), values.end(), hamd->second.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw std::invalid_argument("aggregate: seed set of " + label + " does not match hamd");
    }
    PairwiseStats p;
    p.baseline = label;
    std::vector<double> gaps;
    for (const auto& [seed, vb] : values) {
      const double vh = hamd->second.at(seed);
      if (values_tie(vb, vh)) {
        ++p.ties;
      } else if (vb < vh) {
        ++p.wins;
      } else {
        ++p.losses;
      }
      gaps.push_back(vb == 0.0 ? (vh == 0.0 ? 0.0 : -std::copysign(std::numeric_limits<double>::infinity(), vh))
                               : (vb - vh) / std::abs(vb));
    }
    p.median_gap = median(gaps);
    s.pairwise.push_back(std::move(p));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Rendering

ReportFormat parse_format(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "table-text" || name == "text") return ReportFormat::Text;
  throw std::invalid_argument("unknown report format: " + name);
}

namespace {

enum class CellKind { Empty, Text, Count, Objective, Percent, Gap, Precise };

struct TableCell {
  CellKind kind = CellKind::Empty;
  std::string text;
  double value = 0.0;
};

TableCell text(std::string s) { return {CellKind::Text, std::move(s), 0.0}; }
TableCell count(double v) { return {CellKind::Count, {}, v}; }
TableCell objective(double v) { return {CellKind::Objective, {}, v}; }
TableCell percent(double fraction) { return {CellKind::Percent, {}, 100.0 * fraction}; }
TableCell gap_cell(double fraction) { return {CellKind::Gap, {}, 100.0 * fraction}; }
TableCell precise(double v) { return {CellKind::Precise, {}, v}; }
TableCell empty() { return {}; }

template <class T>
TableCell maybe(const std::optional<T>& v, TableCell (*make)(double)) {
  return v ? make(static_cast<double>(*v)) : empty();
}

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<TableCell>> rows;
};

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string csv_cell(const TableCell& c) {
  switch (c.kind) {
    case CellKind::Empty: return "";
    case CellKind::Text: return csv_field(c.text);
    case CellKind::Count: return fmt::format("{:.0f}", c.value);
    default: return csv_number(c.value);
  }
}

std::string text_cell(const TableCell& c) {
  if (c.kind != CellKind::Empty && c.kind != CellKind::Text && !std::isfinite(c.value)) {
    return std::isnan(c.value) ? "nan" : (c.value > 0 ? "inf" : "-inf");
  }
  switch (c.kind) {
    case CellKind::Empty: return "-";
    case CellKind::Text: return c.text;
    case CellKind::Count: return fmt::format("{:.0f}", c.value);
    case CellKind::Objective: return fmt::format("{:.2f}", c.value);
    case CellKind::Percent: return fmt::format("{:.1f}%", c.value);
    case CellKind::Gap: return fmt::format("{:+.1f}%", c.value);
    case CellKind::Precise: return fmt::format("{:.6f}", c.value);
  }
  return "";
}

std::string render(const Table& t, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::Csv) {
    for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + csv_field(t.header[i]);
    out += '\n';
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
      out += '\n';
    }
    return out;
  }
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> width(t.header.size());
  for (std::size_t i = 0; i < t.header.size(); ++i) width[i] = t.header[i].size();
  for (const auto& row : t.rows) {
    auto& line = cells.emplace_back();
    for (std::size_t i = 0; i < row.size(); ++i) {
      line.push_back(text_cell(row[i]));
      width[i] = std::max(width[i], line.back().size());
    }
  }
  out += t.name + "\n";
  auto emit = [&](const std::vector<std::string>& line, bool left_text, const std::vector<TableCell>* row) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      const bool left = left_text || (row && (*row)[i].kind == CellKind::Text);
      if (i) out += "  ";
      out += left ? fmt::format("{:<{}}", line[i], width[i]) : fmt::format("{:>{}}", line[i], width[i]);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  };
  emit(t.header, true, nullptr);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (std::size_t r = 0; r < cells.size(); ++r) emit(cells[r], false, &t.rows[r]);
  return out;
}

using RecordRefs = std::vector<const ResultRecord*>;

std::map<std::pair<std::size_t, std::size_t>, RecordRefs> by_size(const RecordRefs& rs) {
  std::map<std::pair<std::size_t, std::size_t>, RecordRefs> out;
  for (auto* r : rs) out[{r->n, r->k}].push_back(r);
  return out;
}

RecordRefs of_kind(const std::vector<ResultRecord>& records, const std::string& kind) {
  RecordRefs out;
  for (const auto& r : records) {
    if (r.kind == kind) out.push_back(&r);
  }
  return out;
}

std::vector<ResultRecord> copies(const RecordRefs& rs) {
  std::vector<ResultRecord> out;
  for (auto* r : rs) out.push_back(*r);
  return out;
}

std::string join_values(const std::vector<double>& v, ReportFormat format) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += (i ? ";" : "") + (format == ReportFormat::Csv ? csv_number(v[i]) : fmt::format("{:.2f}", v[i]));
  }
  return s;
}

std::string join_seeds(const std::vector<std::uint64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
  return s;
}

std::optional<double> series_median(const Summary& s, const std::string& label) {
  for (const auto& st : s.series) {
    if (st.label == label) return st.median;
  }
  return std::nullopt;
}

Table scaling_table(const RecordRefs& rs) {
  Table t{"scaling", {"n", "K", "seeds", "random_ref", "hamd", "sa", "tabu", "gap_vs_best_baseline_pct"}, {}};
  for (const auto& [size, group] : by_size(rs)) {
    RecordRefs standard;
    for (auto* r : group) {
      const auto l = r->label();
      if (l == "hamd" || l == "sa" || l == "tabu") standard.push_back(r);
    }
    if (standard.empty()) continue;
    const auto s = aggregate(copies(standard));
    std::vector<double> refs;
    std::set<std::uint64_t> seeds;
    for (auto* r : standard) {
      refs.push_back(r->random_reference);
      seeds.insert(r->seed);
    }
    const auto h = series_median(s, "hamd");
    const auto sa = series_median(s, "sa");
    const auto tabu = series_median(s, "tabu");
    TableCell gap = empty();
    if (h && (sa || tabu)) {
      const double best = std::min(sa.value_or(std::numeric_limits<double>::infinity()),
                                   tabu.value_or(std::numeric_limits<double>::infinity()));
      gap = gap_cell((best - *h) / std::abs(best));
    }
    auto opt = [](const std::optional<double>& v) { return v ? objective(*v) : empty(); };
    t.rows.push_back({count(static_cast<double>(size.first)), count(static_cast<double>(size.second)),
                      count(static_cast<double>(seeds.size())), objective(median(refs)), opt(h), opt(sa), opt(tabu),
                      gap});
  }
  return t;
}

Table multiseed_table(const RecordRefs& rs, ReportFormat format) {
  Table t{"multiseed", {"n", "K", "solver", "seeds", "median", "std", "values", "wtl_vs_hamd", "median_gap_pct"}, {}};
  for (const auto& [size, group] : by_size(rs)) {
    const auto s = aggregate(copies(group));
    for (const auto& st : s.series) {
      std::vector<TableCell> row{count(static_cast<double>(size.first)), count(static_cast<double>(size.second)),
                                 text(st.label),
                                 text(join_seeds(st.seeds)),
                                 objective(st.median),
                                 objective(st.stddev),
                                 text(join_values(st.values, format)),
                                 empty(),
                                 empty()};
      for (const auto& p : s.pairwise) {
        if (p.baseline != st.label) continue;
        row[7] = text(fmt::format("{}/{}/{}", p.wins, p.ties, p.losses));
        row[8] = gap_cell(p.median_gap);
      }
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

Table feasibility_table(const std::vector<ResultRecord>& records) {
  Table t{"feasibility",
          {"kind", "n", "K", "seed", "solver", "lambda_mult", "lambda_k", "matrix_energy", "decoded_native",
           "cardinality", "card_violation", "aux_viol", "aux_total", "aux_viol_rate_pct", "false_pos", "false_neg",
           "penalty_fraction_pct"},
          {}};
  for (const auto& r : records) {
    if (!r.feasibility) continue;
    const auto& f = *r.feasibility;
    t.rows.push_back({text(r.kind), count(static_cast<double>(r.n)), count(static_cast<double>(r.k)),
                      count(static_cast<double>(r.seed)), text(r.solver), objective(r.multiplier), objective(r.lambda_k),
                      objective(f.augmented_matrix_energy), objective(f.decoded_native_objective),
                      count(static_cast<double>(f.cardinality)), count(static_cast<double>(f.card_violation)),
                      count(static_cast<double>(f.aux_viol_count)), count(static_cast<double>(r.triples)),
                      percent(f.aux_viol_rate), count(static_cast<double>(f.false_positive_count)),
                      count(static_cast<double>(f.false_negative_count)), percent(f.penalty_fraction)});
  }
  return t;
}

Table ablation_table(const RecordRefs& rs) {
  Table t{"ablation",
          {"n", "K", "seed", "mode", "ttt_10", "ttt_25", "ttt_50", "ttt_75", "ttt_100", "final", "restarts",
           "ils_steps"},
          {}};
  for (auto* r : rs) {
    if (r->solver != "hamd") continue;
    std::vector<TableCell> row{count(static_cast<double>(r->n)), count(static_cast<double>(r->k)),
                               count(static_cast<double>(r->seed)), text(r->mode)};
    for (double v : r->ttt) row.push_back(objective(v));
    row.push_back(objective(r->objective));
    row.push_back(maybe(r->restarts, count));
    row.push_back(maybe(r->ils_steps, count));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table sensitivity_table(const RecordRefs& rs) {
  Table t{"sensitivity",
          {"n", "K", "lambda_mult", "lambda_k", "solver", "seeds", "median_objective", "median_card_violation",
           "median_aux_viol", "median_penalty_fraction_pct", "hamd_reference", "wtl_vs_hamd", "median_gap_pct"},
          {}};
  for (const auto& [size, group] : by_size(rs)) {
    RecordRefs hamd_refs;
    std::map<std::pair<double, std::string>, RecordRefs> cells;
    for (auto* r : group) {
      if (r->label() == "hamd") {
        hamd_refs.push_back(r);
      } else if (r->solver != "hamd") {
        cells[{r->multiplier, r->solver}].push_back(r);
      }
    }
    std::optional<double> ref;
    if (!hamd_refs.empty()) {
      std::vector<double> v;
      for (auto* r : hamd_refs) v.push_back(r->objective);
      ref = median(v);
    }
    for (const auto& [key, cell] : cells) {
      std::vector<double> obj, cv, av, pf;
      for (auto* r : cell) {
        obj.push_back(r->objective);
        cv.push_back(static_cast<double>(r->feasibility->card_violation));
        av.push_back(static_cast<double>(r->feasibility->aux_viol_count));
        pf.push_back(r->feasibility->penalty_fraction);
      }
      std::vector<TableCell> row{count(static_cast<double>(size.first)),
                                 count(static_cast<double>(size.second)),
                                 objective(key.first),
                                 objective(cell.front()->lambda_k),
                                 text(key.second),
                                 count(static_cast<double>(cell.size())),
                                 objective(median(obj)),
                                 objective(median(cv)),
                                 objective(median(av)),
                                 percent(median(pf)),
                                 ref ? objective(*ref) : empty(),
                                 empty(),
                                 empty()};
      if (!hamd_refs.empty()) {
        auto pair = copies(hamd_refs);
        for (auto* r : cell) {
          pair.push_back(*r);
          pair.back().multiplier = 1.0;
        }
        const auto s = aggregate(pair);
        if (!s.pairwise.empty()) {
          const auto& p = s.pairwise.front();
          row[11] = text(fmt::format("{}/{}/{}", p.wins, p.ties, p.losses));
          row[12] = gap_cell(p.median_gap);
        }
      }
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

Table exact_table(const RecordRefs& rs) {
  Table t{"exact",
          {"n", "K", "instance_seed", "seed", "enumerated", "optimum", "hamd", "gap_pct", "matches",
           "enumeration_seconds"},
          {}};
  for (auto* r : rs) {
    if (r->label() != "hamd" || !r->optimum) continue;
    const double gap = (r->objective - *r->optimum) / std::max(std::abs(*r->optimum), 1e-300);
    const bool match = r->objective - *r->optimum <= 1e-9 * std::max(1.0, std::abs(*r->optimum));
    t.rows.push_back({count(static_cast<double>(r->n)), count(static_cast<double>(r->k)),
                      count(static_cast<double>(r->instance_seed)), count(static_cast<double>(r->seed)),
                      maybe(r->enumerated, count), precise(*r->optimum), precise(r->objective), gap_cell(gap),
                      text(match ? "yes" : "no"), r->enumeration_seconds ? precise(*r->enumeration_seconds) : empty()});
  }
  return t;
}

Table runs_table(const std::vector<ResultRecord>& records) {
  Table t{"runs",
          {"kind", "n", "K", "instance_seed", "seed", "solver", "objective", "cardinality", "random_ref", "iterations",
           "wall_seconds"},
          {}};
  for (const auto& r : records) {
    t.rows.push_back({text(r.kind), count(static_cast<double>(r.n)), count(static_cast<double>(r.k)),
                      count(static_cast<double>(r.instance_seed)), count(static_cast<double>(r.seed)), text(r.label()),
                      objective(r.objective), count(static_cast<double>(r.cardinality)), objective(r.random_reference),
                      count(static_cast<double>(r.iterations)), r.wall_seconds ? precise(*r.wall_seconds) : empty()});
  }
  return t;
}

}  // namespace

std::map<std::string, std::string> render_report(const std::vector<ResultRecord>& records, ReportFormat format) {
  if (records.empty()) throw std::invalid_argument("render_report: no records");
  std::vector<Table> tables;
  if (auto rs = of_kind(records, "scaling"); !rs.empty()) tables.push_back(scaling_table(rs));
  if (auto rs = of_kind(records, "multiseed"); !rs.empty()) tables.push_back(multiseed_table(rs, format));
  tables.push_back(feasibility_table(records));
  if (auto rs = of_kind(records, "ablation"); !rs.empty()) tables.push_back(ablation_table(rs));
  if (auto rs = of_kind(records, "sensitivity"); !rs.empty()) tables.push_back(sensitivity_table(rs));
  if (auto rs = of_kind(records, "exact"); !rs.empty()) tables.push_back(exact_table(rs));
  tables.push_back(runs_table(records));

  std::map<std::string, std::string> out;
  for (const auto& t : tables) {
    if (t.rows.empty()) continue;
    out[t.name] = render(t, format);
  }
  return out;
}

std::vector<fs::path> write_report(const std::vector<ResultRecord>& records, ReportFormat format,
                                   const fs::path& dir) {
  const auto tables = render_report(records, format);
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::vector<fs::path> written;
  for (const auto& [name, content] : tables) {
    const auto path = dir / (name + (format == ReportFormat::Csv ? ".csv" : ".txt"));
    write_file(path, content);
    written.push_back(path);
  }
  return written;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        row.push_back(std::move(field));
        field.clear();
      } else {
        field += c;
      }
    }
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace hamd
