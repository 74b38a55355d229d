#include "jsrl/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

#include "jsrl/errors.hpp"
#include "jsrl/exact.hpp"
#include "jsrl/ppo.hpp"

namespace jsrl {

std::vector<double> phi(std::span<const ReturnSample> history,
                        const std::map<std::string, double>& reference, bool literal) {
  std::vector<double> out;
  out.reserve(history.size());
  for (const auto& sample : history) {
    const auto it = reference.find(sample.instance_id);
    if (it == reference.end())
      throw DataError("no reference return for instance '" + sample.instance_id + "'");
    if (it->second == 0.0)
      throw DataError("zero reference return for instance '" + sample.instance_id + "'");
    out.push_back(literal ? sample.total_return / it->second
                          : std::abs(sample.total_return) / it->second);
  }
  return out;
}

std::vector<double> phi(std::span<const ReturnSample> history, bool literal) {
  std::map<std::string, double> reference;
  for (const auto& sample : history) {
    const double v = literal ? sample.total_return : std::abs(sample.total_return);
    auto [it, inserted] = reference.emplace(sample.instance_id, v);
    if (!inserted) it->second = std::min(it->second, v);
  }
  return phi(history, reference, literal);
}

std::vector<double> moving_average(std::span<const double> values, std::size_t window) {
  if (window == 0) throw ConfigError("moving-average window must be positive");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

namespace {

void check_pair(const RunRecord& a, const RunRecord& b) {
  if (a.instance_id != b.instance_id)
    throw DataError("records compare different instances: '" + a.instance_id + "' vs '" +
                    b.instance_id + "'");
}

}  // namespace

double tau(const RunRecord& rl, const RunRecord& baseline) {
  check_pair(rl, baseline);
  if (!(baseline.time_s > 0.0)) throw DataError("baseline time must be positive");
  return (rl.time_s - baseline.time_s) / baseline.time_s;
}

double rho(const RunRecord& rl, const RunRecord& baseline) {
  check_pair(rl, baseline);
  if (!(baseline.objective > 0.0)) throw DataError("baseline objective must be positive");
  return (rl.objective - baseline.objective) / baseline.objective;
}

std::string metric_name(Metric metric) {
  return metric == Metric::kTime ? "time" : "objective";
}

std::vector<ProfileCurve> performance_profile(std::span<const RunRecord> records, Metric metric,
                                              std::span<const std::string> methods) {
  std::vector<std::string> method_list;
  std::vector<std::string> problems;
  auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& m : methods) add_unique(method_list, m);
  for (const auto& r : records) {
    add_unique(method_list, r.method);
    add_unique(problems, r.instance_id);
  }
  if (method_list.empty() || problems.empty())
    throw DataError("performance profile needs at least one method and one problem");

  const double inf = std::numeric_limits<double>::infinity();
  std::map<std::pair<std::string, std::string>, double> perf;
  for (const auto& r : records) {
    if (!r.succeeded) continue;
    const double v = metric == Metric::kTime ? r.time_s : r.objective;
    if (!(v > 0.0))
      throw DataError("non-positive " + metric_name(metric) + " for '" + r.instance_id +
                      "' / " + r.method);
    perf[{r.instance_id, r.method}] = v;
  }

  std::map<std::string, std::vector<double>> ratios;
  std::set<double> breakpoints;
  for (const auto& p : problems) {
    double best = inf;
    for (const auto& m : method_list)
      if (auto it = perf.find({p, m}); it != perf.end()) best = std::min(best, it->second);
    for (const auto& m : method_list) {
      const auto it = perf.find({p, m});
      const double eta = it == perf.end() ? inf : it->second / best;
      ratios[m].push_back(eta);
      if (std::isfinite(eta)) breakpoints.insert(eta);
    }
  }

  const double n = static_cast<double>(problems.size());
  std::vector<ProfileCurve> curves;
  for (const auto& m : method_list) {
    ProfileCurve curve{m, {}};
    for (double eta : breakpoints) {
      const auto hits = std::count_if(ratios[m].begin(), ratios[m].end(),
                                      [eta](double r) { return r <= eta; });
      curve.points.push_back({eta, static_cast<double>(hits) / n});
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

double profile_at(const ProfileCurve& curve, double eta) {
  double gamma = 0.0;
  for (const auto& p : curve.points) {
    if (p.eta > eta) break;
    gamma = p.gamma;
  }
  return gamma;
}

SummaryStats summarize(std::span<const double> values) {
  SummaryStats s;
  s.count = values.size();
  if (values.empty()) return s;
  // sorted copy so the result does not depend on record order
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double sq = 0.0;
    for (double x : v) sq += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(v.size() - 1));
  }
  s.min = v.front();
  s.max = v.back();
  return s;
}

// ---- bench -----------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

// Floor on recorded wall times so that ratios stay defined.
constexpr double kMinTime = 1e-9;

double elapsed(Clock::time_point start) {
  return std::max(kMinTime, std::chrono::duration<double>(Clock::now() - start).count());
}

std::vector<RunRecord> bench_instance(const LabeledInstance& item, const ActorNet& actor,
                                      double time_unit, const BenchConfig& config) {
  std::vector<RunRecord> out;
  const auto t0 = Clock::now();
  const GreedyResult greedy = greedy_solve(item.instance, actor, time_unit);
  const double rl_time = elapsed(t0);
  out.push_back({item.id, kMethodRl, static_cast<double>(greedy.makespan), rl_time, false, true});

  if (config.mode != BenchMode::kTime) {
    ExactOptions options;
    options.time_limit = config.time_limit;
    options.target = greedy.makespan;
    const auto t1 = Clock::now();
    const ExactResult r = branch_and_bound(item.instance, options);
    const double t = elapsed(t1);
    out.push_back({item.id, kMethodExactQuality, static_cast<double>(r.makespan), t, r.optimal,
                   r.target_reached || r.optimal});
  }
  if (config.mode != BenchMode::kQuality) {
    ExactOptions options;
    options.time_limit = std::min(config.time_limit, rl_time);
    const auto t1 = Clock::now();
    const ExactResult r = branch_and_bound(item.instance, options);
    const double t = elapsed(t1);
    out.push_back(
        {item.id, kMethodExactTime, static_cast<double>(r.makespan), t, r.optimal, true});
  }
  return out;
}

const RunRecord* find_record(std::span<const RunRecord> records, const std::string& id,
                             const std::string& method) {
  for (const auto& r : records)
    if (r.instance_id == id && r.method == method) return &r;
  return nullptr;
}

}  // namespace

BenchResult bench(std::span<const LabeledInstance> instances, const ActorNet& actor,
                  double time_unit, const BenchConfig& config) {
  if (instances.empty()) throw ConfigError("bench needs at least one instance");
  if (!(config.time_limit > 0.0)) throw ConfigError("time limit must be positive");
  if (config.workers < 1) throw ConfigError("workers must be >= 1");
  for (const auto& item : instances) validate(item.instance);

  std::vector<std::vector<RunRecord>> per_instance(instances.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < instances.size(); i = next++)
      per_instance[i] = bench_instance(instances[i], actor, time_unit, config);
  };
  const int workers =
      std::min<int>(config.workers, static_cast<int>(instances.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  BenchResult result;
  for (auto& recs : per_instance)
    for (auto& r : recs) result.records.push_back(std::move(r));

  std::vector<std::string> methods{kMethodRl};
  if (config.mode != BenchMode::kTime) methods.push_back(kMethodExactQuality);
  if (config.mode != BenchMode::kQuality) methods.push_back(kMethodExactTime);
  const std::string time_baseline =
      config.mode != BenchMode::kTime ? kMethodExactQuality : kMethodExactTime;
  const std::string objective_baseline =
      config.mode != BenchMode::kQuality ? kMethodExactTime : kMethodExactQuality;

  std::vector<std::string> classes;
  std::map<std::string, std::string> class_of;
  for (const auto& item : instances) {
    const std::string c = size_class(item.instance);
    class_of[item.id] = c;
    if (std::find(classes.begin(), classes.end(), c) == classes.end()) classes.push_back(c);
  }

  for (const auto& c : classes) {
    for (const auto& m : methods) {
      std::vector<double> times, objectives, taus, rhos;
      for (const auto& r : result.records) {
        if (r.method != m || class_of[r.instance_id] != c) continue;
        times.push_back(r.time_s);
        objectives.push_back(r.objective);
        if (m != kMethodRl) continue;
        const RunRecord* tb = find_record(result.records, r.instance_id, time_baseline);
        if (tb && tb->succeeded) taus.push_back(tau(r, *tb));
        const RunRecord* ob = find_record(result.records, r.instance_id, objective_baseline);
        if (ob && ob->succeeded) rhos.push_back(rho(r, *ob));
      }
      SummaryRow time_row{c, m + ":time", summarize(times)};
      SummaryRow obj_row{c, m + ":objective", summarize(objectives)};
      if (m == kMethodRl) {
        if (!taus.empty()) {
          time_row.avg_tau = summarize(taus).mean;
          time_row.has_tau = true;
        }
        if (!rhos.empty()) {
          obj_row.avg_rho = summarize(rhos).mean;
          obj_row.has_rho = true;
        }
      }
      result.summary.push_back(std::move(time_row));
      result.summary.push_back(std::move(obj_row));
    }
  }

  // The time analysis compares against the run that chased the learned
  // objective; the quality analysis against the run capped at the learned time.
  auto subset = [&](const std::string& baseline) {
    std::vector<RunRecord> out;
    for (const auto& r : result.records)
      if (r.method == kMethodRl || r.method == baseline) out.push_back(r);
    return out;
  };
  const std::vector<std::string> time_methods{kMethodRl, time_baseline};
  const std::vector<std::string> obj_methods{kMethodRl, objective_baseline};
  result.time_profile = performance_profile(subset(time_baseline), Metric::kTime, time_methods);
  result.objective_profile =
      performance_profile(subset(objective_baseline), Metric::kObjective, obj_methods);
  return result;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string records_csv(std::span<const RunRecord> records) {
  std::string out = "instance_id,method,objective,time_s,optimal,succeeded\n";
  for (const auto& r : records)
    out += r.instance_id + "," + r.method + "," + format_number(r.objective) + "," +
           format_number(r.time_s) + "," + (r.optimal ? "true" : "false") + "," +
           (r.succeeded ? "true" : "false") + "\n";
  return out;
}

std::string summary_csv(std::span<const SummaryRow> rows) {
  std::string out = "class,method,count,mean,std,max,min,avg_tau,avg_rho\n";
  for (const auto& r : rows)
    out += r.size_class + "," + r.method + "," + std::to_string(r.stats.count) + "," +
           format_number(r.stats.mean) + "," + format_number(r.stats.stddev) + "," +
           format_number(r.stats.max) + "," + format_number(r.stats.min) + "," +
           (r.has_tau ? format_number(r.avg_tau) : "") + "," +
           (r.has_rho ? format_number(r.avg_rho) : "") + "\n";
  return out;
}

std::string profile_csv(std::span<const ProfileCurve> curves) {
  std::string out = "method,eta,gamma\n";
  for (const auto& c : curves)
    for (const auto& p : c.points)
      out += c.method + "," + format_number(p.eta) + "," + format_number(p.gamma) + "\n";
  return out;
}

}  // namespace jsrl
