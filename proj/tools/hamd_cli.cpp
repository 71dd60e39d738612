// hamd: instance generation, single solves, experiment suites, reports,
// brute-force oracle and feasibility audits.
//
// Worker count for `bench` comes from HAMD_WORKERS (default 1).

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "hamd/bench.hpp"
#include "hamd/diagnostics.hpp"
#include "hamd/instance.hpp"
#include "hamd/quadratizer.hpp"

namespace {

using nlohmann::json;

struct InstanceArgs {
  std::string file;
  std::size_t n = 200;
  std::size_t k = 40;
  std::uint64_t seed = 42;

  void add(CLI::App* app, const std::string& seed_flag) {
    app->add_option("--instance", file, "Instance file (overrides --n/--k)");
    app->add_option("--n", n, "Number of assets");
    app->add_option("--k", k, "Cardinality");
    app->add_option(seed_flag, seed, "Instance generator seed");
  }

  hamd::PortfolioInstance get() const {
    if (!file.empty()) return hamd::load_instance(file);
    return hamd::generate_instance(n, k, seed);
  }
};

struct BudgetArgs {
  std::optional<double> secs;
  std::optional<std::uint64_t> iters;

  void add(CLI::App* app) {
    auto* s = app->add_option("--budget-secs", secs, "Wall-clock budget in seconds");
    auto* i = app->add_option("--budget-iters", iters, "Fixed iteration budget (reproducible)");
    s->excludes(i);
  }

  std::optional<hamd::Budget> get() const {
    if (iters) return hamd::Budget::iterations(*iters);
    if (secs) return hamd::Budget::seconds(*secs);
    return std::nullopt;
  }
};

std::size_t workers_from_env() {
  const char* v = std::getenv("HAMD_WORKERS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long w = std::strtol(v, &end, 10);
  if (*end != '\0' || w < 1) throw std::invalid_argument(fmt::format("HAMD_WORKERS must be a positive integer, got '{}'", v));
  return static_cast<std::size_t>(w);
}

void write_text(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::vector<std::uint8_t> read_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::uint8_t> bits;
  char c;
  while (in.get(c)) {
    if (c == '0' || c == '1') {
      bits.push_back(static_cast<std::uint8_t>(c - '0'));
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      throw std::runtime_error(fmt::format("{}: unexpected character '{}' in state file", path, c));
    }
  }
  return bits;
}

std::string state_text(const std::vector<std::uint8_t>& bits) {
  std::string s;
  for (auto b : bits) s += b ? '1' : '0';
  return s + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cubic cardinality-constrained portfolio optimization: HAMD and quadratized baselines"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate an instance file");
  InstanceArgs gen_inst;
  gen->add_option("--n", gen_inst.n, "Number of assets")->required();
  gen->add_option("--k", gen_inst.k, "Cardinality")->required();
  gen->add_option("--seed", gen_inst.seed, "Generator seed");
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output instance file ('-' for stdout)")->required();
  std::string gen_qubo;
  double gen_mult = 1.0;
  gen->add_option("--qubo-out", gen_qubo, "Also export the augmented QUBO (COO) to this path; header goes to <path>.header");
  gen->add_option("--lambda-mult", gen_mult, "λ_K multiplier for --qubo-out");

  // solve
  auto* solve = app.add_subcommand("solve", "Run one solver on one instance");
  InstanceArgs solve_inst;
  solve_inst.add(solve, "--instance-seed");
  std::string solver = "hamd", mode_name = "full", solve_out, save_state;
  std::uint64_t solve_seed = 42;
  double solve_mult = 1.0;
  std::size_t solve_trials = 1000;
  BudgetArgs solve_budget;
  solve->add_option("--solver", solver, "hamd, sa or tabu")->check(CLI::IsMember({"hamd", "sa", "tabu"}));
  solve->add_option("--mode", mode_name, "HAMD mode")->check(CLI::IsMember({"cont", "proj", "polish", "full"}));
  solve->add_option("--seed", solve_seed, "Solver seed");
  solve->add_option("--lambda-mult", solve_mult, "λ_K multiplier (baselines)");
  solve->add_option("--random-trials", solve_trials, "Random-reference samples");
  solve_budget.add(solve);
  solve->add_option("--out", solve_out, "Result record path (default stdout)");
  solve->add_option("--save-state", save_state, "Write the baseline's best augmented state (0/1 text)");

  // bench
  auto* bench = app.add_subcommand("bench", "Run an experiment suite");
  std::string kind_name = "single", bench_out;
  std::vector<std::size_t> bench_n, bench_k;
  std::vector<std::uint64_t> bench_seeds;
  std::optional<std::uint64_t> bench_iseed;
  std::vector<double> bench_mults;
  std::vector<std::string> bench_solvers, bench_modes;
  std::optional<std::size_t> bench_trials;
  BudgetArgs bench_budget;
  bench->add_option("--kind", kind_name, "scaling, multiseed, ablation, sensitivity, exact or single")
      ->check(CLI::IsMember({"scaling", "multiseed", "ablation", "sensitivity", "exact", "single"}));
  bench->add_option("--n", bench_n, "Sizes (pair up with --k)");
  bench->add_option("--k", bench_k, "Cardinalities");
  bench->add_option("--seeds,--seed", bench_seeds, "Solver seeds");
  bench->add_option("--instance-seed", bench_iseed, "Fixed instance seed (default: per kind)");
  bench->add_option("--lambda-mult", bench_mults, "λ_K multipliers (sensitivity)");
  bench->add_option("--solver", bench_solvers, "Solvers to run")->check(CLI::IsMember({"hamd", "sa", "tabu"}));
  bench->add_option("--mode", bench_modes, "HAMD modes")->check(CLI::IsMember({"cont", "proj", "polish", "full"}));
  bench->add_option("--random-trials", bench_trials, "Random-reference samples");
  bench_budget.add(bench);
  bench->add_option("--out", bench_out, "Output directory")->required();

  // report
  auto* report = app.add_subcommand("report", "Aggregate records and render tables");
  std::string report_in, report_out, report_format = "table-text";
  report->add_option("--in", report_in, "Directory of result records")->required();
  report->add_option("--format", report_format, "csv or table-text")->check(CLI::IsMember({"csv", "table-text"}));
  report->add_option("--out", report_out, "Output directory (default stdout)");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Brute-force exact-K optimum");
  InstanceArgs oracle_inst;
  oracle_inst.n = 20;
  oracle_inst.k = 4;
  oracle_inst.add(oracle, "--seed");
  std::uint64_t cap = hamd::kDefaultEnumerationCap;
  oracle->add_option("--cap", cap, "Maximum number of portfolios to enumerate");

  // audit
  auto* audit = app.add_subcommand("audit", "Feasibility record for a saved augmented state");
  InstanceArgs audit_inst;
  audit_inst.add(audit, "--seed");
  std::string audit_state;
  double audit_mult = 1.0;
  audit->add_option("--state", audit_state, "State file (0/1 characters)")->required();
  audit->add_option("--lambda-mult", audit_mult, "λ_K multiplier used to build the QUBO");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto inst = hamd::generate_instance(gen_inst.n, gen_inst.k, gen_inst.seed);
      write_text(gen_out, hamd::serialize_instance(inst));
      if (!gen_qubo.empty()) {
        const auto qubo = hamd::build_augmented(inst, gen_mult);
        write_text(gen_qubo, hamd::export_qubo_coo(qubo));
        write_text(gen_qubo + ".header", hamd::export_qubo_header(qubo));
      }
      std::cerr << fmt::format("instance n={} K={} seed={} triples={}\n", inst.n, inst.k, inst.seed,
                               inst.triples.size());
    } else if (*solve) {
      const auto inst = solve_inst.get();
      hamd::SingleRun run;
      run.solver = solver;
      run.mode = hamd::parse_mode(mode_name);
      run.multiplier = solve_mult;
      run.seed = solve_seed;
      run.random_trials = solve_trials;
      if (auto b = solve_budget.get()) run.budget = *b;
      std::vector<std::uint8_t> state;
      const auto rec = hamd::run_single(inst, run, save_state.empty() ? nullptr : &state);
      write_text(solve_out, hamd::serialize_record(rec));
      if (!save_state.empty()) {
        if (solver == "hamd") {
          std::vector<std::uint8_t> bits(inst.n, 0);
          for (auto i : rec.selection) bits[i] = 1;
          state = hamd::embed(hamd::build_augmented(inst, solve_mult), bits);
        }
        write_text(save_state, state_text(state));
      }
      std::cerr << fmt::format("{}: objective {:.6f} cardinality {} (random reference {:.6f})\n", rec.label(),
                               rec.objective, rec.cardinality, rec.random_reference);
    } else if (*bench) {
      auto spec = hamd::default_spec(hamd::parse_kind(kind_name));
      if (!bench_n.empty() || !bench_k.empty()) {
        if (bench_n.size() != bench_k.size()) throw std::invalid_argument("--n and --k must be given in pairs");
        spec.sizes.clear();
        for (std::size_t i = 0; i < bench_n.size(); ++i) spec.sizes.push_back({bench_n[i], bench_k[i]});
      }
      if (!bench_seeds.empty()) spec.seeds = bench_seeds;
      if (bench_iseed) spec.instance_seed = bench_iseed;
      if (!bench_mults.empty()) spec.multipliers = bench_mults;
      if (!bench_solvers.empty()) spec.solvers = bench_solvers;
      if (!bench_modes.empty()) {
        spec.modes.clear();
        for (const auto& m : bench_modes) spec.modes.push_back(hamd::parse_mode(m));
      }
      if (bench_trials) spec.random_trials = *bench_trials;
      if (auto b = bench_budget.get()) spec.budget = *b;
      spec.workers = workers_from_env();
      spec.out_dir = bench_out;
      const auto result = hamd::run_experiment(spec);
      const auto tables = hamd::render_report(result.records, hamd::ReportFormat::Text);
      for (const auto& [name, content] : tables) std::cout << content << "\n";
      std::cerr << fmt::format("{} records, {} files written under {}\n", result.records.size(), result.written.size(),
                               bench_out);
    } else if (*report) {
      const auto records = hamd::load_records(report_in);
      const auto format = hamd::parse_format(report_format);
      if (report_out.empty()) {
        for (const auto& [name, content] : hamd::render_report(records, format)) {
          if (format == hamd::ReportFormat::Csv) std::cout << "# " << name << "\n";
          std::cout << content << "\n";
        }
      } else {
        for (const auto& p : hamd::write_report(records, format, report_out)) std::cerr << p.string() << "\n";
      }
    } else if (*oracle) {
      const auto inst = oracle_inst.get();
      const auto res = hamd::brute_force_optimum(inst, cap);
      json j{{"n", inst.n},
             {"k", inst.k},
             {"seed", inst.seed},
             {"triples", inst.triples.size()},
             {"optimum", res.value},
             {"selection", res.portfolio.chosen()},
             {"enumerated", res.visited},
             {"seconds", res.seconds}};
      std::cout << j.dump(2) << "\n";
    } else if (*audit) {
      const auto inst = audit_inst.get();
      const auto qubo = hamd::build_augmented(inst, audit_mult);
      const auto state = read_state(audit_state);
      const auto rec = hamd::feasibility_record(qubo, state, inst);
      json j = hamd::to_json(rec);
      j["lambda_k"] = qubo.lambda_k;
      j["n_aug"] = qubo.n_aug;
      std::cout << j.dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
