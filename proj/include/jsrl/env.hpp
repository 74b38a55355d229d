#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "jsrl/instances.hpp"

namespace jsrl {

struct ScheduleRecord {
  int job = 0;
  int machine = 0;
  Time start = 0;
  Time completion = 0;

  friend bool operator==(const ScheduleRecord&, const ScheduleRecord&) = default;
};

using Schedule = std::vector<ScheduleRecord>;

// Mutable MDP state. Remaining tasks are views into the shared instance,
// indexed by each job's next unscheduled position.
class SchedulingState {
 public:
  SchedulingState() = default;
  explicit SchedulingState(std::shared_ptr<const Instance> instance);

  const Instance& instance() const { return *instance_; }
  int num_jobs() const { return instance_->num_jobs; }
  int num_machines() const { return instance_->num_machines; }

  std::span<const Task> remaining(int job) const;
  std::size_t remaining_count() const;
  bool job_finished(int job) const;
  bool done() const { return remaining_count() == 0; }

  Time job_ready(int job) const { return job_ready_[job]; }
  Time machine_ready(int machine) const { return machine_ready_[machine]; }
  Time current_makespan() const { return makespan_; }
  std::size_t step_index() const { return schedule_.size(); }
  const Schedule& scheduled() const { return schedule_; }

  // Earliest start of the job's head task: max(job ready, machine ready).
  Time earliest_start(int job) const;

  // Schedules the head task of `job` in place and returns the (non-positive)
  // integer reward. Throws InvalidAction for finished or out-of-range jobs.
  Time apply(int job);

  friend bool operator==(const SchedulingState& a, const SchedulingState& b);

 private:
  void check_action(int job) const;

  std::shared_ptr<const Instance> instance_;
  std::vector<std::size_t> next_;
  std::vector<Time> job_ready_;
  std::vector<Time> machine_ready_;
  Time makespan_ = 0;
  Schedule schedule_;
};

struct StepOutcome {
  SchedulingState next_state;
  Time reward = 0;
  bool done = false;
};

struct ActionMask {
  std::vector<bool> allowed;

  bool any() const;
  std::size_t count() const;
};

// One job's remaining tasks encoded as (machine/m, p/scale, s/scale or -1).
struct TaskFeature {
  double machine = 0.0;
  double processing = 0.0;
  double start = -1.0;
};

inline constexpr int kTaskFeatureWidth = 3;

struct StateFeatures {
  std::vector<std::vector<TaskFeature>> jobs;
};

SchedulingState reset(const Instance& instance);
SchedulingState reset(std::shared_ptr<const Instance> instance);

Time earliest_start(const SchedulingState& state, int job);
StepOutcome step(const SchedulingState& state, int job);
ActionMask mask(const SchedulingState& state);
StateFeatures encode(const SchedulingState& state, double scale);

// Default scale: time unit (training mean) times the machine count.
double default_feature_scale(const Instance& instance, double time_unit);

// Throws StateError unless the episode is terminal.
Schedule extract_schedule(const SchedulingState& state);

// Empty string when feasible, else a description of the first violation:
// completion = start + p, job precedence, no overlap on a machine, and every
// task scheduled exactly once.
std::string check_schedule(const Instance& instance, const Schedule& schedule);

Time schedule_makespan(const Schedule& schedule);

std::string schedule_csv(const Schedule& schedule);

}  // namespace jsrl
