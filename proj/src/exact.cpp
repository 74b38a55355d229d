#include "jsrl/exact.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "jsrl/errors.hpp"
#include "jsrl/eval.hpp"

namespace jsrl {

namespace {

std::string tvar(int job, int machine) {
  return "t_" + std::to_string(job) + "_" + std::to_string(machine);
}

std::string lp_number(double v) { return format_number(v); }

std::string lp_row(const MilpConstraint& c) {
  std::string row = " " + c.name + ":";
  bool first = true;
  for (const auto& term : c.terms) {
    const double coef = term.coefficient;
    std::string sign = coef < 0 ? " - " : (first ? " " : " + ");
    const double mag = std::abs(coef);
    row += sign;
    if (mag != 1.0) row += lp_number(mag) + " ";
    row += term.variable;
    first = false;
  }
  switch (c.sense) {
    case Sense::kGreaterEqual: row += " >= "; break;
    case Sense::kLessEqual: row += " <= "; break;
    case Sense::kEqual: row += " = "; break;
  }
  return row + lp_number(c.rhs) + "\n";
}

}  // namespace

MilpModel build_milp(const Instance& instance) {
  validate(instance);
  MilpModel model;
  model.big_m = static_cast<double>(instance.total_processing_time());
  const double M = model.big_m;

  for (int j = 0; j < instance.num_jobs; ++j)
    for (const auto& task : instance.jobs[j]) model.variables.push_back({tvar(j, task.machine)});
  model.variables.push_back({"Cmax"});

  for (int j = 0; j < instance.num_jobs; ++j) {
    const auto& job = instance.jobs[j];
    for (std::size_t pos = 0; pos + 1 < job.size(); ++pos)
      model.constraints.push_back(
          {"prec_" + std::to_string(j) + "_" + std::to_string(pos),
           {{tvar(j, job[pos + 1].machine), 1.0}, {tvar(j, job[pos].machine), -1.0}},
           Sense::kGreaterEqual,
           static_cast<double>(job[pos].processing_time)});
  }

  // processing time of job j on machine k, or -1 when j skips k
  std::vector<std::vector<Time>> on(instance.num_jobs,
                                    std::vector<Time>(instance.num_machines, -1));
  for (int j = 0; j < instance.num_jobs; ++j)
    for (const auto& task : instance.jobs[j]) on[j][task.machine] = task.processing_time;

  for (int k = 0; k < instance.num_machines; ++k)
    for (int j = 0; j < instance.num_jobs; ++j)
      for (int i = j + 1; i < instance.num_jobs; ++i) {
        if (on[j][k] < 0 || on[i][k] < 0) continue;
        const std::string suffix =
            std::to_string(j) + "_" + std::to_string(i) + "_" + std::to_string(k);
        const std::string x = "x_" + suffix;
        model.variables.push_back({x, true, 0.0, 1.0});
        model.constraints.push_back({"disj_a_" + suffix,
                                     {{tvar(j, k), 1.0}, {tvar(i, k), -1.0}, {x, M}},
                                     Sense::kGreaterEqual,
                                     static_cast<double>(on[i][k])});
        model.constraints.push_back({"disj_b_" + suffix,
                                     {{tvar(i, k), 1.0}, {tvar(j, k), -1.0}, {x, -M}},
                                     Sense::kGreaterEqual,
                                     static_cast<double>(on[j][k]) - M});
      }

  for (int j = 0; j < instance.num_jobs; ++j)
    for (const auto& task : instance.jobs[j])
      model.constraints.push_back(
          {"mk_" + std::to_string(j) + "_" + std::to_string(task.machine),
           {{"Cmax", 1.0}, {tvar(j, task.machine), -1.0}},
           Sense::kGreaterEqual,
           static_cast<double>(task.processing_time)});
  return model;
}

std::size_t milp_constraint_count(const Instance& instance) {
  std::size_t count = 0;
  std::vector<std::size_t> per_machine(instance.num_machines, 0);
  for (const auto& job : instance.jobs) {
    count += 2 * job.size() - 1;  // precedence plus one makespan row per task
    for (const auto& task : job) ++per_machine[task.machine];
  }
  for (auto c : per_machine) count += c * (c - 1);  // two rows per unordered pair
  return count;
}

std::string export_lp(const MilpModel& model) {
  std::string out = "\\ job-shop disjunctive model\nMinimize\n obj: " + model.objective + "\n";
  out += "Subject To\n";
  for (const auto& c : model.constraints) out += lp_row(c);
  out += "Bounds\n";
  for (const auto& v : model.variables) {
    if (v.binary) continue;
    if (std::isinf(v.upper))
      out += " " + v.name + " >= " + lp_number(v.lower) + "\n";
    else
      out += " " + lp_number(v.lower) + " <= " + v.name + " <= " + lp_number(v.upper) + "\n";
  }
  out += "Binaries\n";
  for (const auto& v : model.variables)
    if (v.binary) out += " " + v.name + "\n";
  out += "End\n";
  return out;
}

std::string export_lp(const Instance& instance) { return export_lp(build_milp(instance)); }

// ---- priority rules --------------------------------------------------------

namespace {

Schedule priority_schedule(const Instance& instance,
                           const std::function<double(const SchedulingState&, int)>& key) {
  SchedulingState state = reset(instance);
  while (!state.done()) {
    int best = -1;
    double best_key = 0.0;
    for (int j = 0; j < state.num_jobs(); ++j) {
      if (state.job_finished(j)) continue;
      const double k = key(state, j);
      if (best < 0 || k < best_key) {
        best = j;
        best_key = k;
      }
    }
    state.apply(best);
  }
  return state.scheduled();
}

}  // namespace

Schedule spt_schedule(const Instance& instance) {
  return priority_schedule(instance, [](const SchedulingState& s, int j) {
    return static_cast<double>(s.remaining(j).front().processing_time);
  });
}

Schedule mwkr_schedule(const Instance& instance) {
  return priority_schedule(instance, [](const SchedulingState& s, int j) {
    Time work = 0;
    for (const auto& t : s.remaining(j)) work += t.processing_time;
    return -static_cast<double>(work);
  });
}

// ---- branch and bound ------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

class Search {
 public:
  Search(const Instance& instance, const ExactOptions& options)
      : inst_(instance),
        options_(options),
        next_(instance.num_jobs, 0),
        job_ready_(instance.num_jobs, 0),
        machine_ready_(instance.num_machines, 0),
        job_work_(instance.num_jobs, 0),
        machine_work_(instance.num_machines, 0) {
    for (int j = 0; j < inst_.num_jobs; ++j)
      for (const auto& t : inst_.jobs[j]) {
        job_work_[j] += t.processing_time;
        machine_work_[t.machine] += t.processing_time;
      }
    remaining_ = inst_.num_tasks();
  }

  void offer(const Schedule& schedule) {
    const Time mk = schedule_makespan(schedule);
    if (best_.empty() || mk < best_makespan_) {
      best_ = schedule;
      best_makespan_ = mk;
    }
  }

  ExactResult run() {
    start_ = Clock::now();
    root_bound_ = bound(0);
    if (!reached_target() && best_makespan_ > root_bound_) dfs(0, -1);
    ExactResult r;
    r.makespan = best_makespan_;
    r.schedule = best_;
    r.nodes = nodes_;
    r.timed_out = timed_out_;
    r.target_reached = reached_target();
    r.optimal = best_makespan_ <= root_bound_ || (!timed_out_ && !stopped_);
    r.elapsed_s = seconds_since(start_);
    return r;
  }

 private:
  Time es(int j) const {
    return std::max(job_ready_[j], machine_ready_[inst_.jobs[j][next_[j]].machine]);
  }

  // Lower bound on the makespan of any canonical completion.
  Time bound(Time last_start) const {
    Time lb = makespan_;
    for (int j = 0; j < inst_.num_jobs; ++j)
      if (job_work_[j] > 0) lb = std::max(lb, std::max(es(j), last_start) + job_work_[j]);
    for (int k = 0; k < inst_.num_machines; ++k)
      if (machine_work_[k] > 0)
        lb = std::max(lb, std::max(machine_ready_[k], last_start) + machine_work_[k]);
    return lb;
  }

  bool reached_target() const {
    return options_.target && !best_.empty() && best_makespan_ <= *options_.target;
  }

  bool should_stop() {
    if (stopped_) return true;
    if (reached_target()) {
      stopped_ = true;
    } else if ((nodes_ & 255) == 0 && seconds_since(start_) >= options_.time_limit) {
      stopped_ = timed_out_ = true;
    }
    return stopped_;
  }

  void dfs(Time last_start, int last_job) {
    ++nodes_;
    if (remaining_ == 0) {
      if (makespan_ < best_makespan_) {
        best_ = trail_;
        best_makespan_ = makespan_;
      }
      return;
    }
    if (should_stop()) return;

    struct Child {
      Time start;
      int job;
    };
    std::vector<Child> children;
    for (int j = 0; j < inst_.num_jobs; ++j) {
      if (job_work_[j] == 0) continue;
      const Time s = es(j);
      if (s > last_start || (s == last_start && j > last_job)) children.push_back({s, j});
    }
    std::sort(children.begin(), children.end(), [](const Child& a, const Child& b) {
      return a.start != b.start ? a.start < b.start : a.job < b.job;
    });

    for (const auto& [s, j] : children) {
      const Task& task = inst_.jobs[j][next_[j]];
      const Time c = s + task.processing_time;
      const Time saved_job = job_ready_[j];
      const Time saved_machine = machine_ready_[task.machine];
      const Time saved_makespan = makespan_;
      job_ready_[j] = c;
      machine_ready_[task.machine] = c;
      makespan_ = std::max(makespan_, c);
      job_work_[j] -= task.processing_time;
      machine_work_[task.machine] -= task.processing_time;
      ++next_[j];
      --remaining_;
      trail_.push_back({j, task.machine, s, c});

      if (bound(s) < best_makespan_) dfs(s, j);

      trail_.pop_back();
      ++remaining_;
      --next_[j];
      machine_work_[task.machine] += task.processing_time;
      job_work_[j] += task.processing_time;
      makespan_ = saved_makespan;
      machine_ready_[task.machine] = saved_machine;
      job_ready_[j] = saved_job;
      if (should_stop()) return;
    }
  }

  const Instance& inst_;
  ExactOptions options_;
  std::vector<std::size_t> next_;
  std::vector<Time> job_ready_;
  std::vector<Time> machine_ready_;
  std::vector<Time> job_work_;
  std::vector<Time> machine_work_;
  std::size_t remaining_ = 0;
  Time makespan_ = 0;
  Schedule trail_;
  Schedule best_;
  Time best_makespan_ = 0;
  Time root_bound_ = 0;
  std::int64_t nodes_ = 0;
  bool stopped_ = false;
  bool timed_out_ = false;
  Clock::time_point start_;
};

}  // namespace

ExactResult branch_and_bound(const Instance& instance, const ExactOptions& options) {
  validate(instance);
  if (!(options.time_limit > 0.0)) throw ConfigError("time limit must be positive");
  Search search(instance, options);
  search.offer(spt_schedule(instance));
  search.offer(mwkr_schedule(instance));
  return search.run();
}

ExactResult brute_force(const Instance& instance, std::size_t max_tasks, double max_sequences) {
  validate(instance);
  if (instance.num_tasks() > max_tasks)
    throw ConfigError("instance has " + std::to_string(instance.num_tasks()) +
                      " tasks; exhaustive enumeration is limited to " +
                      std::to_string(max_tasks));
  // multinomial coefficient (sum n_j)! / prod n_j!
  double log_count = std::lgamma(static_cast<double>(instance.num_tasks()) + 1.0);
  for (const auto& job : instance.jobs) log_count -= std::lgamma(job.size() + 1.0);
  if (log_count > std::log(max_sequences))
    throw ConfigError("instance too large for exhaustive enumeration");

  const auto start = Clock::now();
  ExactResult best;
  bool have = false;
  std::function<void(const SchedulingState&)> visit = [&](const SchedulingState& state) {
    ++best.nodes;
    if (state.done()) {
      if (!have || state.current_makespan() < best.makespan) {
        best.makespan = state.current_makespan();
        best.schedule = state.scheduled();
        have = true;
      }
      return;
    }
    for (int j = 0; j < state.num_jobs(); ++j)
      if (!state.job_finished(j)) visit(step(state, j).next_state);
  };
  visit(reset(instance));
  best.optimal = true;
  best.elapsed_s = seconds_since(start);
  return best;
}

}  // namespace jsrl
