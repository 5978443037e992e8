#include "psched/instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "psched/common.hpp"

namespace psched {

using nlohmann::json;

int days_to_periods(double days, double dt_days, const std::string& what) {
  const double ratio = days / dt_days;
  const double rounded = std::round(ratio);
  if (!std::isfinite(ratio) || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, std::abs(ratio))) {
    std::ostringstream os;
    os << what << " = " << days << " days is not a multiple of dt = " << dt_days << " days";
    throw ValidationError(os.str());
  }
  return static_cast<int>(rounded);
}

namespace {

std::string task_label(int id) { return "task T" + std::to_string(id); }
std::string unit_label(int id) { return "unit " + std::to_string(id); }

}  // namespace

ProblemInstance::ProblemInstance(InstanceData data) : data_(std::move(data)) {
  const double dt = data_.dt_days;
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt_days must be positive");
  if (data_.horizon_periods < 1) throw ValidationError("horizon_periods must be >= 1");
  n_tasks_ = static_cast<int>(data_.tasks.size());
  n_units_ = static_cast<int>(data_.units.size());
  if (n_tasks_ < 1) throw ValidationError("instance has no tasks");
  if (n_units_ < 1) throw ValidationError("instance has no units");

  const auto n = static_cast<std::size_t>(n_tasks_);
  const auto nu = static_cast<std::size_t>(n_units_);
  cells_.assign(n * nu, Cell{});
  due_periods_.assign(n, 0);
  task_release_.assign(n, 0);
  unit_release_.assign(nu, 0);
  cleaning_.assign(n * n, 0);
  successor_.assign(n * n, 0);
  unit_tasks_.assign(nu, {});
  task_units_.assign(n, {});

  for (int k = 0; k < n_tasks_; ++k) {
    TaskSpec& t = data_.tasks[static_cast<std::size_t>(k)];
    if (t.id != k + 1) {
      throw ValidationError("task ids must be 1..N in order; position " + std::to_string(k + 1) +
                            " holds id " + std::to_string(t.id));
    }
    const std::string label = task_label(t.id);
    if (!(t.order_size_kg > 0.0)) throw ValidationError(label + ": order size must be positive");
    if (!(t.due_date_days > 0.0)) throw ValidationError(label + ": due date must be positive");
    if (t.release_days < 0.0) throw ValidationError(label + ": release time must be >= 0");
    due_periods_[static_cast<std::size_t>(k)] = days_to_periods(t.due_date_days, dt, label + " due date");
    task_release_[static_cast<std::size_t>(k)] = days_to_periods(t.release_days, dt, label + " release time");
    std::sort(t.successors.begin(), t.successors.end());
    t.successors.erase(std::unique(t.successors.begin(), t.successors.end()), t.successors.end());
    for (int s : t.successors) {
      if (s < 1 || s > n_tasks_) {
        throw ValidationError(label + ": successor T" + std::to_string(s) + " is not a declared task");
      }
      if (s == t.id) warnings_.push_back(label + " lists itself as a successor");
      successor_[static_cast<std::size_t>(k) * n + static_cast<std::size_t>(s - 1)] = 1;
    }
  }

  for (int k = 0; k < n_units_; ++k) {
    UnitSpec& u = data_.units[static_cast<std::size_t>(k)];
    if (u.id != k + 1) {
      throw ValidationError("unit ids must be 1..n_u in order; position " + std::to_string(k + 1) +
                            " holds id " + std::to_string(u.id));
    }
    const std::string label = unit_label(u.id);
    if (u.release_days < 0.0) throw ValidationError(label + ": release time must be >= 0");
    unit_release_[static_cast<std::size_t>(k)] = days_to_periods(u.release_days, dt, label + " release time");
    std::sort(u.eligible.begin(), u.eligible.end(),
              [](const Eligibility& a, const Eligibility& b) { return a.task < b.task; });
    for (const Eligibility& e : u.eligible) {
      if (e.task < 1 || e.task > n_tasks_) {
        throw ValidationError(label + ": eligible task T" + std::to_string(e.task) + " is not declared");
      }
      Cell& c = cells_[static_cast<std::size_t>(e.task - 1) * nu + static_cast<std::size_t>(k)];
      const std::string where = task_label(e.task) + " on " + label;
      if (c.eligible) throw ValidationError(where + " is listed twice");
      if (!(e.batch_kg > 0.0)) throw ValidationError(where + ": batch size must be positive");
      if (!(e.proc_days > 0.0)) throw ValidationError(where + ": processing time must be positive");
      c.eligible = true;
      c.batch_kg = e.batch_kg;
      c.proc_periods = days_to_periods(e.proc_days, dt, where + " processing time");
      const double order = data_.tasks[static_cast<std::size_t>(e.task - 1)].order_size_kg;
      // Tolerate representation noise in order/batch before taking the ceiling.
      c.batches = std::max(1, static_cast<int>(std::ceil(order / e.batch_kg - 1e-9)));
      unit_tasks_[static_cast<std::size_t>(k)].push_back(e.task);
      task_units_[static_cast<std::size_t>(e.task - 1)].push_back(u.id);
    }
  }

  for (int i = 1; i <= n_tasks_; ++i) {
    if (task_units_[static_cast<std::size_t>(i - 1)].empty()) {
      throw ValidationError(task_label(i) + " is not eligible on any unit");
    }
  }

  std::vector<char> seen(n * n, 0);
  for (const CleaningEntry& e : data_.cleaning) {
    if (e.from < 1 || e.from > n_tasks_ || e.to < 1 || e.to > n_tasks_) {
      throw ValidationError("cleaning entry T" + std::to_string(e.from) + "->T" + std::to_string(e.to) +
                            " references an undeclared task");
    }
    const std::string where = "cleaning T" + std::to_string(e.from) + "->T" + std::to_string(e.to);
    if (e.days < 0.0) throw ValidationError(where + " must be >= 0");
    const std::size_t idx = static_cast<std::size_t>(e.from - 1) * n + static_cast<std::size_t>(e.to - 1);
    if (seen[idx]) throw ValidationError(where + " is listed twice");
    seen[idx] = 1;
    cleaning_[idx] = days_to_periods(e.days, dt, where);
    if (!successor_[idx]) {
      warnings_.push_back(where + " is not a feasible succession; the entry can never apply");
    }
  }
}

const TaskSpec& ProblemInstance::task(int id) const {
  if (id < 1 || id > n_tasks_) throw LookupError("no task T" + std::to_string(id));
  return data_.tasks[static_cast<std::size_t>(id - 1)];
}

const UnitSpec& ProblemInstance::unit(int id) const {
  if (id < 1 || id > n_units_) throw LookupError("no unit " + std::to_string(id));
  return data_.units[static_cast<std::size_t>(id - 1)];
}

const ProblemInstance::Cell& ProblemInstance::cell(int task, int unit) const {
  if (task < 1 || task > n_tasks_) throw LookupError("no task T" + std::to_string(task));
  if (unit < 1 || unit > n_units_) throw LookupError("no unit " + std::to_string(unit));
  return cells_[static_cast<std::size_t>(task - 1) * static_cast<std::size_t>(n_units_) +
                static_cast<std::size_t>(unit - 1)];
}

const std::vector<int>& ProblemInstance::eligible_tasks(int unit) const {
  if (unit < 1 || unit > n_units_) throw LookupError("no unit " + std::to_string(unit));
  return unit_tasks_[static_cast<std::size_t>(unit - 1)];
}

const std::vector<int>& ProblemInstance::eligible_units(int task) const {
  if (task < 1 || task > n_tasks_) throw LookupError("no task T" + std::to_string(task));
  return task_units_[static_cast<std::size_t>(task - 1)];
}

int ProblemInstance::batches_required(int task, int unit) const {
  const Cell& c = cell(task, unit);
  if (!c.eligible) throw EligibilityError(task_label(task) + " is not eligible on " + unit_label(unit));
  return c.batches;
}

int ProblemInstance::proc_periods(int task, int unit) const {
  const Cell& c = cell(task, unit);
  if (!c.eligible) throw EligibilityError(task_label(task) + " is not eligible on " + unit_label(unit));
  return c.proc_periods;
}

double ProblemInstance::batch_size(int task, int unit) const {
  const Cell& c = cell(task, unit);
  if (!c.eligible) throw EligibilityError(task_label(task) + " is not eligible on " + unit_label(unit));
  return c.batch_kg;
}

bool ProblemInstance::is_successor(int from, int to) const {
  if (from < 1 || from > n_tasks_ || to < 1 || to > n_tasks_) return false;
  return successor_[static_cast<std::size_t>(from - 1) * static_cast<std::size_t>(n_tasks_) +
                    static_cast<std::size_t>(to - 1)] != 0;
}

int ProblemInstance::cleaning_periods(int from, int to, int unit) const {
  if (unit < 1 || unit > n_units_) throw LookupError("no unit " + std::to_string(unit));
  if (from < 1 || from > n_tasks_ || to < 1 || to > n_tasks_) return 0;
  return cleaning_[static_cast<std::size_t>(from - 1) * static_cast<std::size_t>(n_tasks_) +
                   static_cast<std::size_t>(to - 1)];
}

ProblemInstance ProblemInstance::without_release_times() const {
  InstanceData copy = data_;
  for (auto& t : copy.tasks) t.release_days = 0.0;
  for (auto& u : copy.units) u.release_days = 0.0;
  return ProblemInstance(std::move(copy));
}

ProblemInstance ProblemInstance::restricted_to_first(int count, std::string name) const {
  if (count < 1 || count > n_tasks_) throw ConfigError("cannot restrict to " + std::to_string(count) + " tasks");
  InstanceData copy;
  copy.name = std::move(name);
  copy.dt_days = data_.dt_days;
  copy.horizon_periods = data_.horizon_periods;
  for (int k = 0; k < count; ++k) {
    TaskSpec t = data_.tasks[static_cast<std::size_t>(k)];
    std::erase_if(t.successors, [count](int s) { return s > count; });
    copy.tasks.push_back(std::move(t));
  }
  for (UnitSpec u : data_.units) {
    std::erase_if(u.eligible, [count](const Eligibility& e) { return e.task > count; });
    copy.units.push_back(std::move(u));
  }
  for (const CleaningEntry& e : data_.cleaning) {
    if (e.from <= count && e.to <= count) copy.cleaning.push_back(e);
  }
  return ProblemInstance(std::move(copy));
}

namespace {

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key + ": missing required key");
  return *it;
}

double number_at(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) throw ParseError(path + "." + key + ": expected a number");
  return v.get<double>();
}

int integer_at(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_integer()) throw ParseError(path + "." + key + ": expected an integer");
  return v.get<int>();
}

const json& array_at(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array()) throw ParseError(path + "." + key + ": expected an array");
  return v;
}

std::string index_path(const std::string& base, std::size_t k) { return base + "[" + std::to_string(k) + "]"; }

}  // namespace

InstanceData parse_instance_data(const json& doc) {
  const std::string root = "$";
  if (!doc.is_object()) throw ParseError("$: expected an object");
  const int version = integer_at(doc, "schema_version", root);
  if (version != 1) throw ParseError("$.schema_version: unsupported version " + std::to_string(version));

  InstanceData data;
  if (auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) throw ParseError("$.name: expected a string");
    data.name = it->get<std::string>();
  }
  data.dt_days = number_at(doc, "dt_days", root);
  data.horizon_periods = integer_at(doc, "horizon_periods", root);

  const json& tasks = array_at(doc, "tasks", root);
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const std::string p = index_path("$.tasks", k);
    const json& t = tasks[k];
    TaskSpec spec;
    spec.id = integer_at(t, "id", p);
    spec.order_size_kg = number_at(t, "order_size_kg", p);
    spec.due_date_days = number_at(t, "due_date_days", p);
    spec.release_days = number_at(t, "release_days", p);
    const json& succ = array_at(t, "successors", p);
    for (std::size_t j = 0; j < succ.size(); ++j) {
      if (!succ[j].is_number_integer()) throw ParseError(index_path(p + ".successors", j) + ": expected an integer");
      spec.successors.push_back(succ[j].get<int>());
    }
    data.tasks.push_back(std::move(spec));
  }

  const json& units = array_at(doc, "units", root);
  for (std::size_t k = 0; k < units.size(); ++k) {
    const std::string p = index_path("$.units", k);
    const json& u = units[k];
    UnitSpec spec;
    spec.id = integer_at(u, "id", p);
    spec.release_days = number_at(u, "release_days", p);
    const json& el = array_at(u, "eligible", p);
    for (std::size_t j = 0; j < el.size(); ++j) {
      const std::string q = index_path(p + ".eligible", j);
      Eligibility e;
      e.task = integer_at(el[j], "task", q);
      e.batch_kg = number_at(el[j], "batch_kg", q);
      e.proc_days = number_at(el[j], "proc_days", q);
      spec.eligible.push_back(e);
    }
    data.units.push_back(std::move(spec));
  }

  const json& cleaning = array_at(doc, "cleaning", root);
  for (std::size_t k = 0; k < cleaning.size(); ++k) {
    const std::string p = index_path("$.cleaning", k);
    CleaningEntry e;
    e.from = integer_at(cleaning[k], "from", p);
    e.to = integer_at(cleaning[k], "to", p);
    e.days = number_at(cleaning[k], "days", p);
    data.cleaning.push_back(e);
  }
  return data;
}

json to_json(const InstanceData& data) {
  json doc;
  doc["schema_version"] = 1;
  if (!data.name.empty()) doc["name"] = data.name;
  doc["dt_days"] = data.dt_days;
  doc["horizon_periods"] = data.horizon_periods;
  json tasks = json::array();
  for (const TaskSpec& t : data.tasks) {
    tasks.push_back({{"id", t.id},
                     {"order_size_kg", t.order_size_kg},
                     {"due_date_days", t.due_date_days},
                     {"release_days", t.release_days},
                     {"successors", t.successors}});
  }
  doc["tasks"] = std::move(tasks);
  json units = json::array();
  for (const UnitSpec& u : data.units) {
    json eligible = json::array();
    for (const Eligibility& e : u.eligible) {
      eligible.push_back({{"task", e.task}, {"batch_kg", e.batch_kg}, {"proc_days", e.proc_days}});
    }
    units.push_back({{"id", u.id}, {"release_days", u.release_days}, {"eligible", std::move(eligible)}});
  }
  doc["units"] = std::move(units);
  json cleaning = json::array();
  for (const CleaningEntry& e : data.cleaning) {
    cleaning.push_back({{"from", e.from}, {"to", e.to}, {"days", e.days}});
  }
  doc["cleaning"] = std::move(cleaning);
  return doc;
}

ProblemInstance load_instance(const json& doc) { return ProblemInstance(parse_instance_data(doc)); }

ProblemInstance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open instance file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return load_instance(doc);
}

}  // namespace psched
