#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "jsrl/checkpoint.hpp"
#include "jsrl/cli.hpp"
#include "jsrl/errors.hpp"
#include "jsrl/eval.hpp"
#include "jsrl/exact.hpp"
#include "jsrl/ppo.hpp"

namespace py = pybind11;
using namespace jsrl;

namespace {

Instance make_instance(const std::vector<std::vector<std::pair<int, Time>>>& jobs,
                       int num_machines) {
  Instance inst;
  inst.num_jobs = static_cast<int>(jobs.size());
  inst.num_machines = num_machines;
  for (const auto& job : jobs) {
    Job j;
    for (const auto& [machine, p] : job) j.push_back(Task{machine, p});
    inst.jobs.push_back(std::move(j));
  }
  validate(inst);
  return inst;
}

std::vector<std::vector<std::pair<int, Time>>> instance_jobs(const Instance& inst) {
  std::vector<std::vector<std::pair<int, Time>>> out;
  for (const auto& job : inst.jobs) {
    auto& row = out.emplace_back();
    for (const auto& t : job) row.emplace_back(t.machine, t.processing_time);
  }
  return out;
}

py::dict exact_dict(const ExactResult& r) {
  py::dict d;
  d["makespan"] = r.makespan;
  d["schedule"] = r.schedule;
  d["optimal"] = r.optimal;
  d["target_reached"] = r.target_reached;
  d["timed_out"] = r.timed_out;
  d["nodes"] = r.nodes;
  d["elapsed_s"] = r.elapsed_s;
  return d;
}

}  // namespace

PYBIND11_MODULE(jobshop_rl, m) {
  m.doc() = "Job-shop scheduling with a PPO-trained dispatching policy";
  m.attr("__version__") = version_string();

  auto base = py::register_exception<Error>(m, "JobshopError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", data.ptr());
  py::register_exception<InvalidAction>(m, "InvalidAction", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<DegenerateMask>(m, "DegenerateMask", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  py::class_<Instance>(m, "Instance")
      .def(py::init(&make_instance), py::arg("jobs"), py::arg("num_machines"),
           "jobs: list of [(machine, processing_time), ...] in precedence order")
      .def_readonly("num_jobs", &Instance::num_jobs)
      .def_readonly("num_machines", &Instance::num_machines)
      .def_property_readonly("jobs", &instance_jobs)
      .def("num_tasks", &Instance::num_tasks)
      .def("total_processing_time", &Instance::total_processing_time)
      .def("__eq__", [](const Instance& a, const Instance& b) { return a == b; })
      .def("__repr__", [](const Instance& i) { return "<Instance " + size_class(i) + ">"; });

  m.def(
      "generate",
      [](int jobs, int machines, const std::string& dist, std::uint64_t seed) {
        return generate({jobs, machines, parse_distribution(dist), seed});
      },
      py::arg("jobs"), py::arg("machines"), py::arg("dist") = "gaussian:100:10",
      py::arg("seed") = 0);
  m.def("parse_instance", [](const std::string& text) { return parse_instance(text); });
  m.def("write_instance", &write_instance);
  m.def("read_instance", &read_instance_file, py::arg("path"));
  m.def("write_instance_file", &write_instance_file, py::arg("path"), py::arg("instance"));

  py::class_<ScheduleRecord>(m, "ScheduleRecord")
      .def_readonly("job", &ScheduleRecord::job)
      .def_readonly("machine", &ScheduleRecord::machine)
      .def_readonly("start", &ScheduleRecord::start)
      .def_readonly("completion", &ScheduleRecord::completion)
      .def("__repr__", [](const ScheduleRecord& r) {
        std::ostringstream s;
        s << "<ScheduleRecord job=" << r.job << " machine=" << r.machine << " start=" << r.start
          << " completion=" << r.completion << ">";
        return s.str();
      });

  py::class_<SchedulingState>(m, "SchedulingState")
      .def(py::init([](const Instance& inst) { return reset(inst); }), py::arg("instance"))
      .def("apply", &SchedulingState::apply, py::arg("job"), "schedule the job's head task")
      .def("earliest_start", &SchedulingState::earliest_start, py::arg("job"))
      .def("allowed", [](const SchedulingState& s) { return mask(s).allowed; })
      .def("done", &SchedulingState::done)
      .def_property_readonly("makespan", &SchedulingState::current_makespan)
      .def_property_readonly("schedule", &SchedulingState::scheduled)
      .def("features",
           [](const SchedulingState& s, double time_unit) {
             std::vector<std::vector<std::tuple<double, double, double>>> out;
             const auto f = encode(s, default_feature_scale(s.instance(), time_unit));
             for (const auto& job : f.jobs) {
               auto& row = out.emplace_back();
               for (const auto& t : job) row.emplace_back(t.machine, t.processing, t.start);
             }
             return out;
           },
           py::arg("time_unit") = 100.0);

  m.def("check_schedule", &check_schedule, py::arg("instance"), py::arg("schedule"),
        "empty string when feasible, otherwise the first violation");
  m.def("schedule_makespan", &schedule_makespan);

  m.def(
      "branch_and_bound",
      [](const Instance& inst, double time_limit, std::optional<Time> target) {
        ExactOptions opts;
        opts.time_limit = time_limit;
        opts.target = target;
        py::gil_scoped_release release;
        auto r = branch_and_bound(inst, opts);
        py::gil_scoped_acquire acquire;
        return exact_dict(r);
      },
      py::arg("instance"), py::arg("time_limit") = std::numeric_limits<double>::infinity(),
      py::arg("target") = py::none());
  m.def(
      "brute_force", [](const Instance& inst) { return exact_dict(brute_force(inst)); },
      py::arg("instance"));
  m.def("export_lp", py::overload_cast<const Instance&>(&export_lp), py::arg("instance"));
  m.def("milp_constraint_count", &milp_constraint_count);

  m.def(
      "tau",
      [](double rl_time, double baseline_time) {
        return tau({"", "rl", 1.0, rl_time, false, true}, {"", "b", 1.0, baseline_time, false, true});
      },
      py::arg("rl_time"), py::arg("baseline_time"));
  m.def(
      "rho",
      [](double rl_obj, double baseline_obj) {
        return rho({"", "rl", rl_obj, 1.0, false, true}, {"", "b", baseline_obj, 1.0, false, true});
      },
      py::arg("rl_objective"), py::arg("baseline_objective"));
  m.def(
      "moving_average",
      [](const std::vector<double>& v, std::size_t window) { return moving_average(v, window); },
      py::arg("values"), py::arg("window"));
  m.def(
      "performance_profile",
      [](const std::vector<std::tuple<std::string, std::string, double>>& rows) {
        std::vector<RunRecord> records;
        for (const auto& [problem, method, value] : rows)
          records.push_back({problem, method, value, value, false, true});
        py::dict out;
        for (const auto& c : performance_profile(records, Metric::kObjective)) {
          py::list points;
          for (const auto& p : c.points) points.append(py::make_tuple(p.eta, p.gamma));
          out[py::str(c.method)] = points;
        }
        return out;
      },
      py::arg("records"), "records: [(problem, method, performance)], lower is better");

  py::class_<PolicyNetworks>(m, "Policy")
      .def_static(
          "load",
          [](const std::string& path) {
            auto ck = load_checkpoint(path);
            return py::make_tuple(ck.nets, ck.model.time_unit);
          },
          py::arg("path"), "returns (policy, time_unit)")
      .def(
          "solve",
          [](const PolicyNetworks& nets, const Instance& inst, double time_unit) {
            auto g = greedy_solve(inst, nets.actor, time_unit);
            return py::make_tuple(g.makespan, g.schedule);
          },
          py::arg("instance"), py::arg("time_unit") = 100.0);

  m.def(
      "train",
      [](const std::vector<Instance>& instances, int episodes, int rollouts, std::uint64_t seed,
         int hidden1, int hidden2, std::vector<int> ffn, double actor_lr, double critic_lr,
         double reward_scale, double time_unit) {
        std::vector<LabeledInstance> data;
        for (std::size_t i = 0; i < instances.size(); ++i)
          data.push_back({"i" + std::to_string(i), instances[i]});
        TrainConfig cfg;
        cfg.episodes = episodes;
        cfg.rollouts = rollouts;
        cfg.seed = seed;
        cfg.actor_lr = actor_lr;
        cfg.critic_lr = critic_lr;
        cfg.reward_scale = reward_scale;
        ModelConfig model;
        model.hidden1 = hidden1;
        model.hidden2 = hidden2;
        model.ffn_widths = std::move(ffn);
        model.time_unit = time_unit;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(std::move(data), cfg, model);
        }
        py::list log;
        for (const auto& e : r.log) {
          py::dict d;
          d["episode"] = e.episode;
          d["mean_return"] = e.mean_return;
          d["best_return"] = e.best_return;
          d["phi"] = e.phi;
          d["critic_loss"] = e.critic_loss;
          d["kl"] = e.kl;
          d["beta"] = e.beta;
          d["epsilon"] = e.epsilon;
          log.append(d);
        }
        return py::make_tuple(r.nets, log);
      },
      py::arg("instances"), py::arg("episodes") = 100, py::arg("rollouts") = 10,
      py::arg("seed") = 0, py::arg("hidden1") = 16, py::arg("hidden2") = 32,
      py::arg("ffn") = std::vector<int>{64, 32, 16}, py::arg("actor_lr") = 1e-3,
      py::arg("critic_lr") = 1e-2, py::arg("reward_scale") = 100.0, py::arg("time_unit") = 100.0,
      "returns (policy, per-episode log)");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "returns (exit_code, stdout, stderr)");
}
