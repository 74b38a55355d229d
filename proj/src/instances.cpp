#include "jsrl/instances.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "jsrl/errors.hpp"
#include "jsrl/rng.hpp"

namespace jsrl {

std::size_t Instance::num_tasks() const {
  std::size_t total = 0;
  for (const auto& job : jobs) total += job.size();
  return total;
}

Time Instance::total_processing_time() const {
  Time total = 0;
  for (const auto& job : jobs)
    for (const auto& task : job) total += task.processing_time;
  return total;
}

void validate(const Instance& instance) {
  if (instance.num_jobs < 1 || instance.num_machines < 1)
    throw DataError("instance needs at least one job and one machine");
  if (static_cast<int>(instance.jobs.size()) != instance.num_jobs)
    throw DataError("job list length does not match num_jobs");
  for (std::size_t j = 0; j < instance.jobs.size(); ++j) {
    const Job& job = instance.jobs[j];
    if (job.empty() || static_cast<int>(job.size()) > instance.num_machines)
      throw DataError("job " + std::to_string(j) + " has " +
                      std::to_string(job.size()) + " tasks, expected 1.." +
                      std::to_string(instance.num_machines));
    std::vector<bool> seen(instance.num_machines, false);
    for (const Task& task : job) {
      if (task.machine < 0 || task.machine >= instance.num_machines)
        throw DataError("job " + std::to_string(j) + " uses machine " +
                        std::to_string(task.machine) + " out of range");
      if (seen[task.machine])
        throw DataError("job " + std::to_string(j) + " visits machine " +
                        std::to_string(task.machine) + " twice");
      seen[task.machine] = true;
      if (task.processing_time < 1)
        throw DataError("job " + std::to_string(j) +
                        " has a non-positive processing time");
    }
  }
}

namespace {

void check_spec(const GeneratorSpec& spec) {
  if (spec.num_jobs < 1 || spec.num_machines < 1)
    throw ConfigError("generator needs num_jobs >= 1 and num_machines >= 1");
  if (const auto* g = std::get_if<Gaussian>(&spec.distribution)) {
    if (!(g->mean > 0.0) || !(g->stddev > 0.0))
      throw ConfigError("gaussian distribution needs mean > 0 and stddev > 0");
  } else {
    const auto& p = std::get<Poisson>(spec.distribution);
    if (!(p.lambda > 0.0) || p.lambda > 700.0)
      throw ConfigError("poisson distribution needs 0 < lambda <= 700");
  }
}

Time sample_time(Rng& rng, const std::variant<Gaussian, Poisson>& dist) {
  Time value = 0;
  if (const auto* g = std::get_if<Gaussian>(&dist)) {
    value = static_cast<Time>(std::llround(rng.normal(g->mean, g->stddev)));
  } else {
    value = rng.poisson(std::get<Poisson>(dist).lambda);
  }
  return std::max<Time>(value, 1);
}

}  // namespace

Instance generate(const GeneratorSpec& spec) {
  check_spec(spec);
  Rng rng(spec.seed);
  Instance instance;
  instance.num_jobs = spec.num_jobs;
  instance.num_machines = spec.num_machines;
  instance.jobs.resize(spec.num_jobs);
  std::vector<int> order(spec.num_machines);
  for (auto& job : instance.jobs) {
    std::iota(order.begin(), order.end(), 0);
    for (int i = spec.num_machines - 1; i > 0; --i) {
      const auto k = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[k]);
    }
    job.reserve(spec.num_machines);
    for (int machine : order)
      job.push_back(Task{machine, sample_time(rng, spec.distribution)});
  }
  return instance;
}

std::variant<Gaussian, Poisson> parse_distribution(std::string_view text) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(current);
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw ConfigError("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + s + "' in distribution '" +
                        std::string(text) + "'");
    }
  };
  if (parts[0] == "gaussian" && parts.size() == 3) {
    Gaussian g{number(parts[1]), number(parts[2])};
    if (!(g.mean > 0.0) || !(g.stddev > 0.0))
      throw ConfigError("gaussian distribution needs mean > 0 and stddev > 0");
    return g;
  }
  if (parts[0] == "poisson" && parts.size() == 2) {
    Poisson p{number(parts[1])};
    if (!(p.lambda > 0.0) || p.lambda > 700.0)
      throw ConfigError("poisson distribution needs 0 < lambda <= 700");
    return p;
  }
  throw ConfigError("distribution must be gaussian:<mean>:<stddev> or "
                    "poisson:<lambda>, got '" + std::string(text) + "'");
}

std::string distribution_tag(const std::variant<Gaussian, Poisson>& dist) {
  std::ostringstream out;
  if (const auto* g = std::get_if<Gaussian>(&dist))
    out << "gaussian" << g->mean << "-" << g->stddev;
  else
    out << "poisson" << std::get<Poisson>(dist).lambda;
  return out.str();
}

namespace {

std::vector<std::int64_t> parse_ints(std::string_view line, std::size_t lineno) {
  std::vector<std::int64_t> values;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
      ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r')
      ++j;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(line.data() + i, line.data() + j, v);
    if (ec != std::errc() || ptr != line.data() + j)
      throw ParseError(lineno, "not an integer: '" +
                                   std::string(line.substr(i, j - i)) + "'");
    values.push_back(v);
    i = j;
  }
  return values;
}

}  // namespace

Instance parse_instance(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  // Trailing blank lines are tolerated; blank lines inside the body are not.
  while (!lines.empty() && parse_ints(lines.back(), lines.size()).empty())
    lines.pop_back();
  if (lines.empty()) throw ParseError(1, "missing header '<jobs> <machines>'");

  const auto header = parse_ints(lines[0], 1);
  if (header.size() != 2)
    throw ParseError(1, "header must hold exactly two integers");
  if (header[0] < 1 || header[1] < 1)
    throw ParseError(1, "header counts must be positive");
  Instance instance;
  instance.num_jobs = static_cast<int>(header[0]);
  instance.num_machines = static_cast<int>(header[1]);
  if (static_cast<std::int64_t>(lines.size()) - 1 != header[0])
    throw ParseError(lines.size() < static_cast<std::size_t>(header[0]) + 1
                         ? lines.size() + 1
                         : static_cast<std::size_t>(header[0]) + 2,
                     "header declares " + std::to_string(header[0]) +
                         " jobs but " + std::to_string(lines.size() - 1) +
                         " job lines follow");

  instance.jobs.resize(instance.num_jobs);
  for (int j = 0; j < instance.num_jobs; ++j) {
    const std::size_t lineno = static_cast<std::size_t>(j) + 2;
    const auto values = parse_ints(lines[j + 1], lineno);
    if (values.empty() || values.size() % 2 != 0)
      throw ParseError(lineno, "expected machine/time pairs");
    const std::size_t count = values.size() / 2;
    if (count > static_cast<std::size_t>(instance.num_machines))
      throw ParseError(lineno, "job has more tasks than machines");
    std::vector<bool> seen(instance.num_machines, false);
    for (std::size_t t = 0; t < count; ++t) {
      const auto machine = values[2 * t];
      const auto time = values[2 * t + 1];
      if (machine < 0 || machine >= instance.num_machines)
        throw ParseError(lineno, "machine " + std::to_string(machine) +
                                     " out of range");
      if (seen[machine])
        throw ParseError(lineno, "duplicate machine " + std::to_string(machine) +
                                     " within a job");
      seen[machine] = true;
      if (time < 1)
        throw ParseError(lineno, "non-positive processing time " +
                                     std::to_string(time));
      instance.jobs[j].push_back(Task{static_cast<int>(machine), time});
    }
  }
  return instance;
}

std::string write_instance(const Instance& instance) {
  std::string out = std::to_string(instance.num_jobs) + " " +
                    std::to_string(instance.num_machines) + "\n";
  for (const auto& job : instance.jobs) {
    for (std::size_t t = 0; t < job.size(); ++t) {
      if (t) out += ' ';
      out += std::to_string(job[t].machine);
      out += ' ';
      out += std::to_string(job[t].processing_time);
    }
    out += '\n';
  }
  return out;
}

Instance read_instance_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open instance file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_instance(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path);
  }
}

void write_instance_file(const std::string& path, const Instance& instance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write instance file '" + path + "'");
  out << write_instance(instance);
}

std::vector<LabeledInstance> load_dataset(const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(directory, ec))
    throw DataError("dataset directory '" + directory + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory))
    if (entry.is_regular_file() && entry.path().extension() == ".jssp")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<LabeledInstance> dataset;
  dataset.reserve(files.size());
  for (const auto& file : files)
    dataset.push_back({file.stem().string(), read_instance_file(file.string())});
  return dataset;
}

std::string size_class(const Instance& instance) {
  return std::to_string(instance.num_jobs) + "x" +
         std::to_string(instance.num_machines);
}

}  // namespace jsrl
