#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace jsrl {

using Time = std::int64_t;

struct Task {
  int machine = 0;
  Time processing_time = 1;

  friend bool operator==(const Task&, const Task&) = default;
};

// A job is its task list in precedence order.
using Job = std::vector<Task>;

struct Instance {
  int num_jobs = 0;
  int num_machines = 0;
  std::vector<Job> jobs;

  std::size_t num_tasks() const;
  Time total_processing_time() const;

  friend bool operator==(const Instance&, const Instance&) = default;
};

// An instance with a stable identifier (file stem, generator tag, ...).
struct LabeledInstance {
  std::string id;
  Instance instance;
};

// Throws DataError describing the first violated invariant.
void validate(const Instance& instance);

struct Gaussian {
  double mean = 100.0;
  double stddev = 10.0;
};

struct Poisson {
  double lambda = 100.0;
};

struct GeneratorSpec {
  int num_jobs = 1;
  int num_machines = 1;
  std::variant<Gaussian, Poisson> distribution = Gaussian{};
  std::uint64_t seed = 0;
};

// Every job is a uniformly random permutation of all machines; processing
// times are drawn i.i.d., rounded to nearest and clamped to >= 1. Draw order:
// for each job, the Fisher-Yates shuffle first, then its times in task order.
Instance generate(const GeneratorSpec& spec);

// "gaussian:100:10" or "poisson:100".
std::variant<Gaussian, Poisson> parse_distribution(std::string_view text);
std::string distribution_tag(const std::variant<Gaussian, Poisson>& dist);

// Canonical text format: "<n> <m>\n" then one line per job with
// "machine time machine time ...". Errors carry 1-based line numbers.
Instance parse_instance(std::string_view text);
std::string write_instance(const Instance& instance);

Instance read_instance_file(const std::string& path);
void write_instance_file(const std::string& path, const Instance& instance);

// All *.jssp files of a directory, sorted by file name; ids are file stems.
std::vector<LabeledInstance> load_dataset(const std::string& directory);

// "<n>x<m>", used to group benchmark rows.
std::string size_class(const Instance& instance);

}  // namespace jsrl
