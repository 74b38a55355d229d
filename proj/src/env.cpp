#include "jsrl/env.hpp"

#include <algorithm>

#include "jsrl/errors.hpp"

namespace jsrl {

SchedulingState::SchedulingState(std::shared_ptr<const Instance> instance)
    : instance_(std::move(instance)),
      next_(instance_->num_jobs, 0),
      job_ready_(instance_->num_jobs, 0),
      machine_ready_(instance_->num_machines, 0) {
  schedule_.reserve(instance_->num_tasks());
}

std::span<const Task> SchedulingState::remaining(int job) const {
  const Job& tasks = instance_->jobs[job];
  return std::span<const Task>(tasks).subspan(next_[job]);
}

std::size_t SchedulingState::remaining_count() const {
  return instance_->num_tasks() - schedule_.size();
}

bool SchedulingState::job_finished(int job) const {
  return next_[job] >= instance_->jobs[job].size();
}

void SchedulingState::check_action(int job) const {
  if (job < 0 || job >= num_jobs())
    throw InvalidAction("job " + std::to_string(job) + " out of range");
  if (job_finished(job))
    throw InvalidAction("job " + std::to_string(job) + " has no remaining task");
}

Time SchedulingState::earliest_start(int job) const {
  check_action(job);
  const Task& head = instance_->jobs[job][next_[job]];
  return std::max(job_ready_[job], machine_ready_[head.machine]);
}

Time SchedulingState::apply(int job) {
  const Time start = earliest_start(job);
  const Task& head = instance_->jobs[job][next_[job]];
  const Time completion = start + head.processing_time;
  job_ready_[job] = completion;
  machine_ready_[head.machine] = completion;
  ++next_[job];
  schedule_.push_back({job, head.machine, start, completion});
  Time reward = 0;
  if (completion > makespan_) {
    reward = -(completion - makespan_);
    makespan_ = completion;
  }
  return reward;
}

bool operator==(const SchedulingState& a, const SchedulingState& b) {
  const bool same_instance =
      a.instance_ == b.instance_ ||
      (a.instance_ && b.instance_ && *a.instance_ == *b.instance_);
  return same_instance && a.next_ == b.next_ && a.job_ready_ == b.job_ready_ &&
         a.machine_ready_ == b.machine_ready_ && a.makespan_ == b.makespan_ &&
         a.schedule_ == b.schedule_;
}

bool ActionMask::any() const {
  return std::find(allowed.begin(), allowed.end(), true) != allowed.end();
}

std::size_t ActionMask::count() const {
  return static_cast<std::size_t>(std::count(allowed.begin(), allowed.end(), true));
}

SchedulingState reset(const Instance& instance) {
  return reset(std::make_shared<const Instance>(instance));
}

SchedulingState reset(std::shared_ptr<const Instance> instance) {
  return SchedulingState(std::move(instance));
}

Time earliest_start(const SchedulingState& state, int job) {
  return state.earliest_start(job);
}

StepOutcome step(const SchedulingState& state, int job) {
  StepOutcome outcome{state, 0, false};
  outcome.reward = outcome.next_state.apply(job);
  outcome.done = outcome.next_state.done();
  return outcome;
}

ActionMask mask(const SchedulingState& state) {
  ActionMask m;
  m.allowed.resize(state.num_jobs());
  for (int j = 0; j < state.num_jobs(); ++j) m.allowed[j] = !state.job_finished(j);
  return m;
}

StateFeatures encode(const SchedulingState& state, double scale) {
  if (!(scale > 0.0)) throw ConfigError("feature scale must be positive");
  StateFeatures features;
  features.jobs.resize(state.num_jobs());
  const double m = static_cast<double>(state.num_machines());
  for (int j = 0; j < state.num_jobs(); ++j) {
    const auto tasks = state.remaining(j);
    auto& out = features.jobs[j];
    out.reserve(tasks.size());
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      TaskFeature f;
      f.machine = static_cast<double>(tasks[t].machine) / m;
      f.processing = static_cast<double>(tasks[t].processing_time) / scale;
      f.start = t == 0 ? static_cast<double>(state.earliest_start(j)) / scale : -1.0;
      out.push_back(f);
    }
  }
  return features;
}

double default_feature_scale(const Instance& instance, double time_unit) {
  return time_unit * static_cast<double>(instance.num_machines);
}

Schedule extract_schedule(const SchedulingState& state) {
  if (!state.done())
    throw StateError("schedule requested before the episode is terminal (" +
                     std::to_string(state.remaining_count()) + " tasks left)");
  return state.scheduled();
}

std::string check_schedule(const Instance& instance, const Schedule& schedule) {
  if (schedule.size() != instance.num_tasks())
    return "schedule has " + std::to_string(schedule.size()) + " records, expected " +
           std::to_string(instance.num_tasks());
  // Per-job records in task order.
  std::vector<std::vector<const ScheduleRecord*>> by_job(instance.num_jobs);
  std::vector<std::vector<const ScheduleRecord*>> by_machine(instance.num_machines);
  for (const auto& r : schedule) {
    if (r.job < 0 || r.job >= instance.num_jobs) return "record with bad job index";
    if (r.machine < 0 || r.machine >= instance.num_machines)
      return "record with bad machine index";
    by_job[r.job].push_back(&r);
    by_machine[r.machine].push_back(&r);
  }
  for (int j = 0; j < instance.num_jobs; ++j) {
    const Job& job = instance.jobs[j];
    auto& recs = by_job[j];
    if (recs.size() != job.size())
      return "job " + std::to_string(j) + " has the wrong number of records";
    std::stable_sort(recs.begin(), recs.end(),
                     [](auto* a, auto* b) { return a->start < b->start; });
    for (std::size_t t = 0; t < job.size(); ++t) {
      const auto& r = *recs[t];
      if (r.machine != job[t].machine)
        return "job " + std::to_string(j) + " task " + std::to_string(t) +
               " runs on the wrong machine";
      if (r.start < 0) return "negative start time";
      if (r.completion != r.start + job[t].processing_time)
        return "job " + std::to_string(j) + " task " + std::to_string(t) +
               ": completion != start + p";
      if (t > 0 && r.start < recs[t - 1]->completion)
        return "job " + std::to_string(j) + " task " + std::to_string(t) +
               " starts before its predecessor completes";
    }
  }
  for (int k = 0; k < instance.num_machines; ++k) {
    auto& recs = by_machine[k];
    std::sort(recs.begin(), recs.end(),
              [](auto* a, auto* b) { return a->start < b->start; });
    for (std::size_t i = 1; i < recs.size(); ++i)
      if (recs[i]->start < recs[i - 1]->completion)
        return "machine " + std::to_string(k) + " runs two tasks at once";
  }
  return {};
}

Time schedule_makespan(const Schedule& schedule) {
  Time makespan = 0;
  for (const auto& r : schedule) makespan = std::max(makespan, r.completion);
  return makespan;
}

std::string schedule_csv(const Schedule& schedule) {
  std::string out = "job,machine,start,completion\n";
  for (const auto& r : schedule)
    out += std::to_string(r.job) + "," + std::to_string(r.machine) + "," +
           std::to_string(r.start) + "," + std::to_string(r.completion) + "\n";
  return out;
}

}  // namespace jsrl
