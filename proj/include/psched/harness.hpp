#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "psched/env.hpp"
#include "psched/instance.hpp"
#include "psched/optimizer.hpp"
#include "psched/policy.hpp"
#include "psched/risk.hpp"
#include "psched/rollout.hpp"
#include "psched/schedule_check.hpp"

namespace psched {

/// One row of the study design: which uncertainties are active, whether
/// release times apply, what is optimized and how the trained policy is judged.
struct ExperimentConfig {
  std::string id = "custom";
  std::string instance = "instance1";
  bool processing_uncertain = false;
  bool due_uncertain = false;
  bool finite_release = false;
  ObjectiveMode objective;
  bool misspecify = false;  // validation plant differs from the training plant
  int k_pt = 0;
  int k_dd = 0;
  std::string trained_on;  // experiment whose policy a misspecification row reuses
  int train_samples = 1;
  int validation_samples = 500;
  int c = 1;
  int due_confirm_lead_periods = 6;
  double report_beta = 0.2;
  double upsilon = 0.05;
  PenaltyConfig penalty;

  bool uncertain() const { return processing_uncertain || due_uncertain; }
  /// Plant used for training; the misspecification constants are left out.
  UncertaintyConfig training_uncertainty() const;
  /// Plant used for validation, including any misspecification.
  UncertaintyConfig validation_uncertainty() const;
  void validate() const;
};

/// E1..E8, D3..D8, M1..M8 on the given instance. LookupError otherwise.
ExperimentConfig experiment_config(std::string_view id, std::string_view instance = "instance1");
std::vector<std::string> experiment_ids();

nlohmann::json to_json(const ExperimentConfig& config);
/// Inverse of to_json; ParseError on a malformed record.
ExperimentConfig experiment_from_json(const nlohmann::json& doc);
/// `key=value` overrides of experiment fields (samples, c, lead, kappa_g, ...).
/// Returns false if the key is not an experiment field.
bool apply_experiment_override(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Builtin name or path to an instance file.
ProblemInstance resolve_instance(const std::string& name_or_path);
/// The instance with release times removed when the experiment says so.
ProblemInstance experiment_instance(const ExperimentConfig& config);

struct ValidationReport {
  RiskSummary summary;            // over raw returns
  RiskSummary penalized_summary;  // same statistics over penalized returns
  std::vector<int> violation_counts;  // indexed by ViolationKind
  int episodes_with_hard_violations = 0;
  std::vector<double> raw_returns;
  std::vector<double> penalized_returns;
  std::vector<char> success;
  std::vector<int> makespans;
  EpisodeResult first_episode;
  int final_period_first = 0;
};

struct ValidationOptions {
  int workers = 1;
  RolloutOptions rollout;
};

ValidationReport validate_policy(const Policy& policy, const ExperimentConfig& config, int n_mc, std::uint64_t seed,
                                 const ValidationOptions& options = {});

nlohmann::json to_json(const ValidationReport& report);

struct TrainingOptions {
  SwarmConfig swarm;
  int workers = 1;
  bool common_random_numbers = false;
  std::string checkpoint_path;  // written after every iteration when set
  std::string resume_path;
};

struct TrainingResult {
  Policy policy;
  OptimizeResult search;
};

/// Optimizes a fresh network for the experiment's training plant.
TrainingResult train_policy(const ExperimentConfig& config, std::uint64_t seed, const TrainingOptions& options);

/// Training objective of a parameter vector with the given evaluation seed.
CandidateScore score_candidate(std::span<const double> theta, const NetworkSpec& spec, const ProblemInstance& instance,
                               const ExperimentConfig& config, std::uint64_t seed, int workers = 1);

struct ExperimentResult {
  TrainingResult training;
  ValidationReport validation;
};

/// Trains, validates on fresh scenarios and writes policy.json, training.csv,
/// metrics.json and gantt.svg into out_dir.
ExperimentResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, const TrainingOptions& options,
                                const std::string& out_dir);

/// One lane per unit, campaign bars labelled T<i>, setup drawn hatched,
/// time axis in days.
std::string export_gantt(const EpisodeResult& episode, const ProblemInstance& instance);

struct LatencyStats {
  int n = 0;
  double mean_us = 0.0;
  double std_us = 0.0;
  double p50_us = 0.0;
  double p95_us = 0.0;
  double max_us = 0.0;
};

/// Wall time of mask + normalize + forward + round, per decision, after a
/// warm-up episode.
LatencyStats measure_decision_latency(const Policy& policy, const ProblemInstance& instance, int n_steps,
                                      std::uint64_t seed = 0);

nlohmann::json to_json(const LatencyStats& stats);

/// Seed stream used for validation scenarios, kept apart from training.
std::uint64_t validation_seed(std::uint64_t seed);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace psched
