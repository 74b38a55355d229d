#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "jsrl/instances.hpp"
#include "jsrl/models.hpp"

namespace jsrl {

// ---- training gap ---------------------------------------------------------

struct ReturnSample {
  std::string instance_id;
  double total_return = 0.0;  // negative: minus the makespan
};

// Per-sample objective gap against the best return seen for the same
// instance anywhere in `history`.
//   default: |R_k| / min_h |R_h|   (>= 1, 1 = best seen)
//   literal: R_k / min_h R_h       (the raw ratio; min is the most negative)
std::vector<double> phi(std::span<const ReturnSample> history, bool literal = false);

// Same, against an explicit per-instance reference (best |R| for the default
// convention, most negative R for the literal one). Throws DataError for ids
// absent from the reference.
std::vector<double> phi(std::span<const ReturnSample> history,
                        const std::map<std::string, double>& reference, bool literal);

// Trailing moving average; the first window-1 entries average what exists.
std::vector<double> moving_average(std::span<const double> values, std::size_t window);

// ---- benchmark statistics -------------------------------------------------

struct RunRecord {
  std::string instance_id;
  std::string method;
  double objective = 0.0;  // makespan
  double time_s = 0.0;
  bool optimal = false;
  // False when an exact run hit its time limit before reaching its goal;
  // such records enter profiles as missing.
  bool succeeded = true;
};

// (time_rl - time_base) / time_base; negative when the first record is faster.
double tau(const RunRecord& rl, const RunRecord& baseline);
// (obj_rl - obj_base) / obj_base; negative when the first record is better.
double rho(const RunRecord& rl, const RunRecord& baseline);

enum class Metric { kTime, kObjective };
std::string metric_name(Metric metric);

struct ProfilePoint {
  double eta = 1.0;
  double gamma = 0.0;
};

struct ProfileCurve {
  std::string method;
  std::vector<ProfilePoint> points;  // eta ascending
};

// Per-problem ratio against the best method on that problem; a missing
// (problem, method) record counts as an infinite ratio. Every curve is sampled
// at the union of all finite ratios. Problems and methods are those present
// in `records`, plus any listed in `methods`.
std::vector<ProfileCurve> performance_profile(std::span<const RunRecord> records, Metric metric,
                                              std::span<const std::string> methods = {});

// Value of a step curve at eta (0 below the first breakpoint).
double profile_at(const ProfileCurve& curve, double eta);

struct SummaryStats {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1), 0 for n < 2
  double max = 0.0;
  double min = 0.0;
};

SummaryStats summarize(std::span<const double> values);

// ---- bench harness --------------------------------------------------------

enum class BenchMode { kQuality, kTime, kBoth };

struct BenchConfig {
  double time_limit = 10.0;  // hard cap for every exact run, seconds
  BenchMode mode = BenchMode::kBoth;
  int workers = 1;
};

inline constexpr const char* kMethodRl = "rl";
// Exact search until it matches the learned objective (time analysis).
inline constexpr const char* kMethodExactQuality = "exact_match_quality";
// Exact search with the learned policy's wall time as budget (quality analysis).
inline constexpr const char* kMethodExactTime = "exact_match_time";

struct SummaryRow {
  std::string size_class;
  std::string method;  // "<method>:<metric>"
  SummaryStats stats;
  double avg_tau = 0.0;  // only on the rl:time row
  double avg_rho = 0.0;  // only on the rl:objective row
  bool has_tau = false;
  bool has_rho = false;
};

struct BenchResult {
  std::vector<RunRecord> records;
  std::vector<SummaryRow> summary;
  std::vector<ProfileCurve> time_profile;
  std::vector<ProfileCurve> objective_profile;
};

BenchResult bench(std::span<const LabeledInstance> instances, const ActorNet& actor,
                  double time_unit, const BenchConfig& config);

std::string records_csv(std::span<const RunRecord> records);
std::string summary_csv(std::span<const SummaryRow> rows);
std::string profile_csv(std::span<const ProfileCurve> curves);

// Shortest round-trip decimal form of a double, used by every CSV writer.
std::string format_number(double value);

}  // namespace jsrl
