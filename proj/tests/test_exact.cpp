#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "jsrl/errors.hpp"
#include "jsrl/exact.hpp"
#include "support.hpp"

using namespace jsrl;

namespace {

// Minimal reader for the LP subset we emit: section keywords, named rows
// "name: [+|-] [coef] var ... (>=|<=|=) rhs", bounds and binaries.
struct ParsedLp {
  std::string sense;
  std::map<std::string, std::map<std::string, double>> rows;
  std::map<std::string, std::pair<std::string, double>> rhs;
  std::set<std::string> variables;
  std::set<std::string> binaries;
};

ParsedLp parse_lp(const std::string& text) {
  ParsedLp lp;
  std::istringstream in(text);
  std::string line, section;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '\\') continue;
    if (line[0] != ' ') {
      section = line;
      if (section == "Minimize" || section == "Maximize") lp.sense = section;
      continue;
    }
    std::istringstream tok(line);
    std::vector<std::string> words;
    for (std::string w; tok >> w;) words.push_back(w);
    if (section == "Subject To") {
      const std::string name = words[0].substr(0, words[0].size() - 1);
      double sign = 1.0, coef = 1.0;
      for (std::size_t i = 1; i < words.size(); ++i) {
        const std::string& w = words[i];
        if (w == "+" || w == "-") {
          sign = w == "-" ? -1.0 : 1.0;
        } else if (w == ">=" || w == "<=" || w == "=") {
          lp.rhs[name] = {w, std::stod(words.at(i + 1))};
          break;
        } else if (std::isdigit(static_cast<unsigned char>(w[0]))) {
          coef = std::stod(w);
        } else {
          lp.rows[name][w] += sign * coef;
          lp.variables.insert(w);
          sign = coef = 1.0;
        }
      }
    } else if (section == "Bounds") {
      for (const auto& w : words)
        if (std::isalpha(static_cast<unsigned char>(w[0]))) lp.variables.insert(w);
    } else if (section == "Binaries") {
      for (const auto& w : words) {
        lp.binaries.insert(w);
        lp.variables.insert(w);
      }
    }
  }
  return lp;
}

// Evaluates every model constraint at a concrete schedule with the x values
// implied by it.
bool satisfies(const MilpModel& model, const Schedule& sched, Time makespan) {
  std::map<std::string, double> value{{"Cmax", static_cast<double>(makespan)}};
  for (const auto& r : sched)
    value["t_" + std::to_string(r.job) + "_" + std::to_string(r.machine)] =
        static_cast<double>(r.start);
  for (const auto& v : model.variables)
    if (v.binary) {
      int j, i, k;
      std::sscanf(v.name.c_str(), "x_%d_%d_%d", &j, &i, &k);
      const double tj = value["t_" + std::to_string(j) + "_" + std::to_string(k)];
      const double ti = value["t_" + std::to_string(i) + "_" + std::to_string(k)];
      value[v.name] = tj < ti ? 1.0 : 0.0;
    }
  for (const auto& c : model.constraints) {
    double lhs = 0.0;
    for (const auto& t : c.terms) lhs += t.coefficient * value.at(t.variable);
    if (lhs < c.rhs - 1e-9) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("milp counts on the 2x2 example") {
  const MilpModel m = build_milp(testing::example_2x2());
  std::map<std::string, int> families;
  for (const auto& c : m.constraints) families[c.name.substr(0, c.name.find('_'))]++;
  CHECK(families["prec"] == 2);
  CHECK(families["disj"] == 4);
  CHECK(families["mk"] == 4);
  int binaries = 0;
  for (const auto& v : m.variables) binaries += v.binary;
  CHECK(binaries == 2);
  CHECK(m.variables.size() == 4 + 1 + 2);
  CHECK(m.big_m == 10.0);
  CHECK(milp_constraint_count(testing::example_2x2()) == m.constraints.size());
}

TEST_CASE("milp on a single task") {
  const Instance inst{1, 1, {{{0, 5}}}};
  const MilpModel m = build_milp(inst);
  CHECK(m.constraints.size() == 1);
  CHECK(m.variables.size() == 2);
  const std::string lp = export_lp(m);
  CHECK(lp.find(" mk_0_0: Cmax - t_0_0 >= 5\n") != std::string::npos);
  CHECK(lp.find("Minimize\n obj: Cmax\n") != std::string::npos);
}

TEST_CASE("big-M is the total processing time") {
  const Instance inst = generate({8, 6, Gaussian{100, 10}, 3});
  const MilpModel m = build_milp(inst);
  CHECK(m.big_m == static_cast<double>(inst.total_processing_time()));
  CHECK(m.big_m > 4000);
  CHECK(m.big_m < 5600);
}

TEST_CASE("exported LP parses back to the model") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance inst = testing::random_instance(rng, 1 + rng.below(5), 1 + rng.below(4),
                                                   trial % 2 == 0);
    const MilpModel m = build_milp(inst);
    const ParsedLp lp = parse_lp(export_lp(m));
    CHECK(lp.sense == "Minimize");
    CHECK(lp.rows.size() == m.constraints.size());
    CHECK(lp.rows.size() == milp_constraint_count(inst));
    CHECK(lp.variables.size() == m.variables.size());
    std::size_t binaries = 0;
    for (const auto& v : m.variables) binaries += v.binary;
    CHECK(lp.binaries.size() == binaries);
    for (const auto& c : m.constraints) {
      const auto& row = lp.rows.at(c.name);
      CHECK(row.size() == c.terms.size());
      for (const auto& t : c.terms) CHECK(row.at(t.variable) == t.coefficient);
      CHECK(lp.rhs.at(c.name).second == c.rhs);
      CHECK(lp.rhs.at(c.name).first == ">=");
    }
  }
}

TEST_CASE("every environment schedule satisfies the MILP") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Instance inst = testing::random_instance(rng, 1 + rng.below(5), 1 + rng.below(4),
                                                   trial % 3 == 0);
    auto e = testing::random_episode(inst, rng);
    CHECK(satisfies(build_milp(inst), e.state.scheduled(), e.state.current_makespan()));
  }
}

TEST_CASE("branch and bound on tiny cases") {
  const Instance single{1, 1, {{{0, 5}}}};
  const auto r = branch_and_bound(single);
  CHECK(r.makespan == 5);
  CHECK(r.optimal);

  const auto ex = branch_and_bound(testing::example_2x2());
  CHECK(ex.optimal);
  CHECK(ex.makespan == brute_force(testing::example_2x2()).makespan);
  CHECK(check_schedule(testing::example_2x2(), ex.schedule).empty());
  CHECK(schedule_makespan(ex.schedule) == ex.makespan);
}

TEST_CASE("brute force small cases") {
  CHECK(brute_force(Instance{1, 2, {{{0, 3}, {1, 4}}}}).makespan == 7);
  CHECK(brute_force(Instance{2, 1, {{{0, 3}}, {{0, 4}}}}).makespan == 7);

  // the 2x2 example: minimum over all 6 interleavings, enumerated by hand
  const Instance ex = testing::example_2x2();
  Time best = std::numeric_limits<Time>::max();
  for (const auto& order : std::vector<std::vector<int>>{
           {0, 0, 1, 1}, {0, 1, 0, 1}, {0, 1, 1, 0}, {1, 0, 0, 1}, {1, 0, 1, 0}, {1, 1, 0, 0}}) {
    SchedulingState s = reset(ex);
    for (int a : order) s.apply(a);
    best = std::min(best, s.current_makespan());
  }
  CHECK(brute_force(ex).makespan == best);
  CHECK(brute_force(ex).nodes == 1 + 2 + 4 + 6 + 6);

  CHECK_THROWS_AS(brute_force(generate({4, 4, Gaussian{}, 1})), ConfigError);
}

TEST_CASE("branch and bound equals brute force on random instances") {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(3));
    const int m = 2 + static_cast<int>(rng.below(2));
    const Instance inst = testing::random_instance(rng, n, m, trial % 2 == 1);
    if (inst.num_tasks() > 12) continue;
    const auto bb = branch_and_bound(inst);
    const auto bf = brute_force(inst);
    CHECK(bb.optimal);
    CHECK(bb.makespan == bf.makespan);
    CHECK(check_schedule(inst, bb.schedule).empty());
  }
}

TEST_CASE("root bound never exceeds a feasible makespan") {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const Instance inst = testing::random_instance(rng, 4, 3);
    const Time opt = branch_and_bound(inst).makespan;
    Time root = 0;
    for (const auto& job : inst.jobs) {
      Time w = 0;
      for (const auto& t : job) w += t.processing_time;
      root = std::max(root, w);
    }
    std::vector<Time> load(inst.num_machines, 0);
    for (const auto& job : inst.jobs)
      for (const auto& t : job) load[t.machine] += t.processing_time;
    for (Time l : load) root = std::max(root, l);
    CHECK(opt >= root);
    for (int k = 0; k < 20; ++k) CHECK(testing::random_episode(inst, rng).state.current_makespan() >= opt);
  }
}

TEST_CASE("time limit and target") {
  const Instance big = generate({12, 10, Gaussian{100, 30}, 5});
  ExactOptions opts;
  opts.time_limit = 0.05;
  const auto r = branch_and_bound(big, opts);
  CHECK(r.timed_out);
  CHECK_FALSE(r.optimal);
  CHECK(check_schedule(big, r.schedule).empty());
  CHECK(r.elapsed_s < 1.0);

  const auto spt = schedule_makespan(spt_schedule(big));
  opts.time_limit = 5.0;
  opts.target = spt;
  const auto t = branch_and_bound(big, opts);
  CHECK(t.target_reached);
  CHECK(t.makespan <= spt);

  opts.time_limit = 0.0;
  CHECK_THROWS_AS(branch_and_bound(big, opts), ConfigError);
}

TEST_CASE("priority rules give feasible schedules") {
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const Instance inst = testing::random_instance(rng, 5, 4, true);
    CHECK(check_schedule(inst, spt_schedule(inst)).empty());
    CHECK(check_schedule(inst, mwkr_schedule(inst)).empty());
  }
}
