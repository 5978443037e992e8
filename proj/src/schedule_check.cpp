#include "psched/schedule_check.hpp"

#include <algorithm>
#include <map>

namespace psched {

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Eligibility: return "eligibility";
    case ViolationKind::Sequencing: return "sequencing";
    case ViolationKind::Cleaning: return "cleaning";
    case ViolationKind::Release: return "release";
    case ViolationKind::CampaignCompletion: return "campaign_completion";
    case ViolationKind::LaneOverlap: return "lane_overlap";
    case ViolationKind::Restart: return "restart";
    case ViolationKind::DoubleAllocation: return "double_allocation";
  }
  return "unknown";
}

int ScheduleAudit::count(ViolationKind kind) const {
  return static_cast<int>(std::count_if(violations.begin(), violations.end(),
                                        [kind](const Violation& v) { return v.kind == kind; }));
}

int ScheduleAudit::hard_count() const {
  return static_cast<int>(violations.size()) - count(ViolationKind::DoubleAllocation);
}

namespace {

std::string label(const ScheduleEvent& e) {
  return "T" + std::to_string(e.task) + " on unit " + std::to_string(e.unit) + " started at " +
         std::to_string(e.start_period);
}

// Period after which the campaign no longer holds its unit.
int release_period(const ScheduleEvent& e, int final_period) {
  if (e.completed) return e.end_period();
  return final_period;
}

}  // namespace

ScheduleAudit audit_schedule(const std::vector<ScheduleEvent>& events, const ProblemInstance& instance,
                             int final_period) {
  ScheduleAudit audit;
  auto flag = [&](ViolationKind kind, const ScheduleEvent& e, std::string detail) {
    audit.violations.push_back(Violation{kind, e.unit, e.task, label(e) + ": " + std::move(detail)});
  };

  for (const ScheduleEvent& e : events) {
    if (e.unit < 1 || e.unit > instance.num_units() || e.task < 1 || e.task > instance.num_tasks() ||
        !instance.eligible(e.task, e.unit)) {
      flag(ViolationKind::Eligibility, e, "task cannot run on this unit");
      continue;
    }
    const int begin = e.processing_start();
    if (begin < instance.task_release_periods(e.task)) flag(ViolationKind::Release, e, "starts before the task release");
    if (begin < instance.unit_release_periods(e.unit)) flag(ViolationKind::Release, e, "starts before the unit release");

    const int nb = instance.batches_required(e.task, e.unit);
    if (static_cast<int>(e.batch_completion_periods.size()) != nb) {
      flag(ViolationKind::CampaignCompletion, e, "planned batch count differs from the order");
    }
    int prev = begin;
    for (int c : e.batch_completion_periods) {
      if (c <= prev) flag(ViolationKind::CampaignCompletion, e, "batch completions are not increasing");
      prev = c;
    }
    if (e.aborted) flag(ViolationKind::CampaignCompletion, e, "campaign was abandoned");
    if (e.completed && e.batches_done != nb) flag(ViolationKind::CampaignCompletion, e, "marked complete early");
    if (!e.completed && !e.aborted) {
      if (e.batch_completion_periods.empty() || e.end_period() <= final_period) {
        flag(ViolationKind::CampaignCompletion, e, "unfinished although its last batch was due in the episode");
      }
    }
  }

  // Lane rules: campaigns in one unit in start order.
  std::map<int, std::vector<const ScheduleEvent*>> lanes;
  for (const ScheduleEvent& e : events) lanes[e.unit].push_back(&e);
  for (auto& [unit, lane] : lanes) {
    std::stable_sort(lane.begin(), lane.end(),
                     [](const ScheduleEvent* a, const ScheduleEvent* b) { return a->start_period < b->start_period; });
    const ScheduleEvent* last_done = nullptr;
    for (std::size_t k = 0; k < lane.size(); ++k) {
      const ScheduleEvent& e = *lane[k];
      if (k > 0) {
        const ScheduleEvent& p = *lane[k - 1];
        if (e.start_period < release_period(p, final_period)) {
          flag(ViolationKind::LaneOverlap, e, "unit still busy with T" + std::to_string(p.task));
        }
      }
      if (last_done != nullptr && e.task >= 1 && e.task <= instance.num_tasks()) {
        if (!instance.is_successor(last_done->task, e.task)) {
          flag(ViolationKind::Sequencing, e, "T" + std::to_string(last_done->task) + " cannot be followed by it");
        }
        const int ready = last_done->end_period() + instance.cleaning_periods(last_done->task, e.task, unit);
        if (e.processing_start() < ready) {
          flag(ViolationKind::Cleaning, e, "cleaning after T" + std::to_string(last_done->task) + " not respected");
        }
      }
      if (e.completed) last_done = &e;
    }
  }

  // Task-level rules across units.
  std::map<int, std::vector<const ScheduleEvent*>> by_task;
  for (const ScheduleEvent& e : events) by_task[e.task].push_back(&e);
  for (auto& [task, list] : by_task) {
    for (std::size_t a = 0; a < list.size(); ++a) {
      const ScheduleEvent& e = *list[a];
      int first_finish = -1;  // earliest completion among the other campaigns of the task
      for (const ScheduleEvent* o : list) {
        if (o != &e && o->completed && (first_finish < 0 || o->end_period() < first_finish)) {
          first_finish = o->end_period();
        }
      }
      if (first_finish >= 0 && e.start_period >= first_finish) {
        flag(ViolationKind::Restart, e, "task was already finished");
      }
      for (std::size_t b = 0; b < a; ++b) {
        const ScheduleEvent& o = *list[b];
        const bool overlap = e.start_period < release_period(o, final_period) &&
                             o.start_period < release_period(e, final_period);
        if (overlap && o.unit != e.unit) {
          flag(ViolationKind::DoubleAllocation, e, "also running on unit " + std::to_string(o.unit));
        }
      }
    }
  }
  return audit;
}

}  // namespace psched
