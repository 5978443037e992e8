#pragma once

#include <string>
#include <vector>

#include "psched/instance.hpp"
#include "psched/rollout.hpp"

namespace psched {

enum class ViolationKind {
  Eligibility,
  Sequencing,
  Cleaning,
  Release,
  CampaignCompletion,
  LaneOverlap,
  Restart,
  DoubleAllocation,
};

std::string to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  int unit = 0;
  int task = 0;
  std::string detail;
};

struct ScheduleAudit {
  std::vector<Violation> violations;

  int count(ViolationKind kind) const;
  /// Violations of every rule the mask is meant to enforce, i.e. all but
  /// double allocation, which is only penalized.
  int hard_count() const;
  bool clean() const { return violations.empty(); }
};

/// Re-derives every operating rule from the campaign list alone. Campaigns
/// still running when the episode ended at `final_period` may be partial.
ScheduleAudit audit_schedule(const std::vector<ScheduleEvent>& events, const ProblemInstance& instance,
                             int final_period);

}  // namespace psched
