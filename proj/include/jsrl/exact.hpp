#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "jsrl/env.hpp"
#include "jsrl/instances.hpp"

namespace jsrl {

// ---- disjunctive MILP -----------------------------------------------------
//
// Variables: t_<job>_<machine> (start time, >= 0), Cmax, and one binary
// x_<j>_<i>_<machine> per pair of jobs j < i sharing a machine (1 when j runs
// before i). Constraints:
//   prec_<job>_<pos>:    t_{j,next} - t_{j,cur} >= p_{j,cur}
//   disj_a_<j>_<i>_<k>:  t_{j,k} - t_{i,k} + M x >= p_{i,k}
//   disj_b_<j>_<i>_<k>:  t_{i,k} - t_{j,k} - M x >= p_{j,k} - M
//   mk_<job>_<machine>:  Cmax - t_{j,k} >= p_{j,k}
// with M the total processing time.

enum class Sense { kGreaterEqual, kLessEqual, kEqual };

struct LinearTerm {
  std::string variable;
  double coefficient = 0.0;
};

struct MilpConstraint {
  std::string name;
  std::vector<LinearTerm> terms;
  Sense sense = Sense::kGreaterEqual;
  double rhs = 0.0;
};

struct MilpVariable {
  std::string name;
  bool binary = false;
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
};

struct MilpModel {
  std::vector<MilpVariable> variables;
  std::vector<MilpConstraint> constraints;
  std::string objective = "Cmax";  // minimized
  double big_m = 0.0;
};

MilpModel build_milp(const Instance& instance);

// CPLEX LP text of the model.
std::string export_lp(const MilpModel& model);
std::string export_lp(const Instance& instance);

// Number of constraints the disjunctive model has for `instance`.
std::size_t milp_constraint_count(const Instance& instance);

// ---- search ---------------------------------------------------------------

struct ExactOptions {
  double time_limit = std::numeric_limits<double>::infinity();  // seconds
  // Stop as soon as a schedule with makespan <= target is found.
  std::optional<Time> target;
};

struct ExactResult {
  Time makespan = 0;
  Schedule schedule;
  bool optimal = false;        // proven optimal
  bool target_reached = false;
  bool timed_out = false;
  std::int64_t nodes = 0;
  double elapsed_s = 0.0;
};

// Depth-first branch and bound over dispatch sequences. Only sequences whose
// start times are non-decreasing (ties by job index) are explored; every
// schedule the environment can produce has exactly one such sequence.
ExactResult branch_and_bound(const Instance& instance, const ExactOptions& options = {});

// Enumerates every dispatch sequence without pruning. Throws ConfigError when
// the instance has more than max_tasks tasks or more than max_sequences
// sequences.
ExactResult brute_force(const Instance& instance, std::size_t max_tasks = 12,
                        double max_sequences = 5e6);

// Priority-rule schedules used as initial incumbents.
Schedule spt_schedule(const Instance& instance);   // shortest head task
Schedule mwkr_schedule(const Instance& instance);  // most work remaining

}  // namespace jsrl
