#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hamd/diagnostics.hpp"
#include "hamd/hamd_solver.hpp"

namespace hamd {

enum class ExperimentKind { Scaling, Multiseed, Ablation, Sensitivity, Exact, Single };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& name);

struct SizeK {
  std::size_t n = 0;
  std::size_t k = 0;
  friend bool operator==(const SizeK&, const SizeK&) = default;
};

inline const std::vector<std::uint64_t> kDefaultSeeds{42, 1042, 2042};

/// One experiment: sizes x seeds x solver variants. HAMD runs once per mode,
/// baselines once per λ_K multiplier. When `instance_seed` is unset every
/// solver seed also generates its own instance.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Single;
  std::vector<SizeK> sizes;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> instance_seed;
  Budget budget = Budget::seconds(60.0);
  std::vector<double> multipliers{1.0};
  std::vector<std::string> solvers{"hamd", "sa", "tabu"};
  std::vector<Mode> modes{Mode::Full};
  std::size_t random_trials = 1000;
  std::size_t workers = 1;
  std::filesystem::path out_dir;

  /// Throws std::invalid_argument on an inconsistent spec.
  void validate() const;
};

/// Paper-shaped defaults for each kind; out_dir is left empty.
ExperimentSpec default_spec(ExperimentKind kind);

/// Self-describing record of one solver run. Serializes to schema
/// "hamd-result/1". Wall-clock figures are only present for wall-clock
/// budgets so fixed-iteration records are byte-reproducible.
struct ResultRecord {
  std::string kind;
  std::size_t n = 0;
  std::size_t k = 0;
  std::uint64_t instance_seed = 0;
  std::uint64_t seed = 0;
  std::size_t triples = 0;
  std::string solver;  // hamd, sa, tabu
  std::string mode;    // hamd only
  double multiplier = 1.0;
  double lambda_k = 0.0;  // baselines only
  nlohmann::json config;  // full solver config echo
  Budget budget;
  double objective = 0.0;  // decoded native objective
  std::size_t cardinality = 0;
  std::vector<std::size_t> selection;
  std::array<double, 5> ttt{};
  std::optional<FeasibilityRecord> feasibility;  // baselines only
  std::optional<std::uint64_t> restarts;         // hamd only
  std::optional<std::uint64_t> ils_steps;        // hamd only
  std::uint64_t iterations = 0;
  double random_reference = 0.0;
  std::optional<double> optimum;  // exact kind
  std::optional<std::uint64_t> enumerated;
  std::optional<double> wall_seconds;
  std::optional<double> enumeration_seconds;
  std::vector<std::string> warnings;

  /// Series label used by aggregate/report: "hamd", "hamd-proj", "sa",
  /// "tabu@0.5x", ...
  std::string label() const;
  std::string file_stem() const;
};

inline constexpr const char* kResultSchema = "hamd-result/1";

nlohmann::json to_json(const FeasibilityRecord& record);
nlohmann::json to_json(const ResultRecord& record);
ResultRecord record_from_json(const nlohmann::json& j);
std::string serialize_record(const ResultRecord& record);

/// All *.json records under `dir` (recursively), ordered by file name.
std::vector<ResultRecord> load_records(const std::filesystem::path& dir);

/// One solver run on one instance, recorded as kind "single".
/// `augmented_state` receives the baseline's best raw state when non-null.
struct SingleRun {
  std::string solver = "hamd";
  Mode mode = Mode::Full;
  double multiplier = 1.0;
  Budget budget = Budget::seconds(60.0);
  std::uint64_t seed = 42;
  std::size_t random_trials = 1000;
};

ResultRecord run_single(const PortfolioInstance& instance, const SingleRun& run,
                        std::vector<std::uint8_t>* augmented_state = nullptr);

struct ExperimentResult {
  std::vector<ResultRecord> records;
  std::vector<std::filesystem::path> written;
};

/// Runs every cell, writes records/<stem>.json plus rendered tables into
/// spec.out_dir (csv and text). Cells run on spec.workers threads; output
/// order and content do not depend on the worker count.
ExperimentResult run_experiment(const ExperimentSpec& spec);

struct SeriesStats {
  std::string label;
  std::vector<std::uint64_t> seeds;
  std::vector<double> values;  // ordered like seeds
  double median = 0.0;
  double stddev = 0.0;  // population
};

/// Baseline's record against HAMD on matched seeds: wins are seeds where
/// the baseline is lower. Gap = (v_baseline − v_hamd)/|v_baseline|, so a
/// positive gap means HAMD is lower.
struct PairwiseStats {
  std::string baseline;
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
  double median_gap = 0.0;
};

struct Summary {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<SeriesStats> series;
  std::vector<PairwiseStats> pairwise;
};

inline constexpr double kTieTolerance = 1e-9;

double median(std::vector<double> values);
double population_stddev(const std::vector<double>& values);
/// Ties when |a − b| ≤ kTieTolerance · max(1, |a|, |b|).
bool values_tie(double a, double b);

/// Records must share (n, K). Throws std::invalid_argument on mixed sizes
/// or when a baseline's seed set differs from HAMD's.
Summary aggregate(const std::vector<ResultRecord>& records);

enum class ReportFormat { Csv, Text };
ReportFormat parse_format(const std::string& name);

/// Table name -> rendered content. Throws on an empty record set.
std::map<std::string, std::string> render_report(const std::vector<ResultRecord>& records,
                                                 ReportFormat format);

/// Writes each table to dir/<name>.<csv|txt>; returns the paths.
std::vector<std::filesystem::path> write_report(const std::vector<ResultRecord>& records,
                                                ReportFormat format, const std::filesystem::path& dir);

/// Parses RFC-4180-ish CSV (no embedded newlines) into rows of fields.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace hamd
