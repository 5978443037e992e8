#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace psched {

/// One client order. Day-valued fields are kept as given; period values are
/// derived by ProblemInstance at construction.
struct TaskSpec {
  int id = 0;
  double order_size_kg = 0.0;
  double due_date_days = 0.0;
  double release_days = 0.0;
  std::vector<int> successors;  // ascending task ids
};

struct Eligibility {
  int task = 0;
  double batch_kg = 0.0;
  double proc_days = 0.0;
};

struct UnitSpec {
  int id = 0;
  double release_days = 0.0;
  std::vector<Eligibility> eligible;
};

struct CleaningEntry {
  int from = 0;
  int to = 0;
  double days = 0.0;
};

/// Raw, day-valued description of a plant. This is what the JSON schema
/// carries; ProblemInstance validates it and derives the period tables.
struct InstanceData {
  std::string name;
  double dt_days = 0.5;
  int horizon_periods = 200;
  std::vector<TaskSpec> tasks;
  std::vector<UnitSpec> units;
  std::vector<CleaningEntry> cleaning;
};

/// Immutable, validated problem instance. All runtime quantities are integer
/// periods. Tasks are 1..N, units 1..n_u; the idle control code is N+1.
class ProblemInstance {
 public:
  /// Validates and converts. Throws ValidationError on a broken invariant.
  explicit ProblemInstance(InstanceData data);

  const InstanceData& data() const { return data_; }
  const std::string& name() const { return data_.name; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  int num_tasks() const { return n_tasks_; }
  int num_units() const { return n_units_; }
  int idle_code() const { return n_tasks_ + 1; }
  int horizon() const { return data_.horizon_periods; }
  double dt_days() const { return data_.dt_days; }
  int state_dim() const { return 2 * n_tasks_ + 2 * n_units_ + 1; }

  const TaskSpec& task(int id) const;
  const UnitSpec& unit(int id) const;

  bool eligible(int task, int unit) const { return cell(task, unit).eligible; }
  /// Tasks unit can process, ascending.
  const std::vector<int>& eligible_tasks(int unit) const;
  /// Units able to process task, ascending.
  const std::vector<int>& eligible_units(int task) const;

  /// ceil(order size / batch size); EligibilityError if not eligible.
  int batches_required(int task, int unit) const;
  int proc_periods(int task, int unit) const;
  double batch_size(int task, int unit) const;

  double order_size(int id) const { return task(id).order_size_kg; }
  int due_periods(int task) const { return due_periods_[task - 1]; }
  int task_release_periods(int task) const { return task_release_[task - 1]; }
  int unit_release_periods(int unit) const { return unit_release_[unit - 1]; }

  bool is_successor(int from, int to) const;
  /// Cleaning time between consecutive tasks in a unit. The data is
  /// unit-independent today; the unit argument keeps the accessor stable.
  int cleaning_periods(int from, int to, int unit) const;

  /// Same instance with every task and unit release time set to zero.
  ProblemInstance without_release_times() const;

  /// The first `count` tasks with every table restricted to that subset.
  ProblemInstance restricted_to_first(int count, std::string name) const;

 private:
  struct Cell {
    bool eligible = false;
    int batches = 0;
    int proc_periods = 0;
    double batch_kg = 0.0;
  };
  const Cell& cell(int task, int unit) const;

  InstanceData data_;
  int n_tasks_ = 0;
  int n_units_ = 0;
  std::vector<Cell> cells_;  // [task-1][unit-1]
  std::vector<int> due_periods_;
  std::vector<int> task_release_;
  std::vector<int> unit_release_;
  std::vector<int> cleaning_;  // [from-1][to-1]
  std::vector<char> successor_;  // [from-1][to-1]
  std::vector<std::vector<int>> unit_tasks_;
  std::vector<std::vector<int>> task_units_;
  std::vector<std::string> warnings_;
};

/// Converts a day value to whole periods; ValidationError naming `what` if
/// the value is not a multiple of dt.
int days_to_periods(double days, double dt_days, const std::string& what);

/// Parses an instance document (schema_version 1).
ProblemInstance load_instance(const nlohmann::json& doc);
ProblemInstance load_instance_file(const std::string& path);
InstanceData parse_instance_data(const nlohmann::json& doc);
nlohmann::json to_json(const InstanceData& data);

/// "instance1" or "instance2"; LookupError otherwise.
ProblemInstance builtin_instance(std::string_view name);
std::vector<std::string> builtin_instance_names();

}  // namespace psched
