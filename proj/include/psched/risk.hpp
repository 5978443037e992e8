#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace psched {

/// k-th smallest sample with k = max(1, floor(beta * n)), 1-based.
double var_estimate(std::span<const double> samples, double beta);

/// Sample-average CVaR: var + (1 / (beta n)) * sum_i min(0, z_i - var).
double cvar_estimate(std::span<const double> samples, double beta);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double x, double a, double b);

/// Inverse of I_x(a, b) in x, by bisection to 1e-12.
double inverse_incomplete_beta(double p, double a, double b);

/// 1 - betainv(upsilon, n + 1 - s, s): lower confidence bound on the
/// probability that an episode is constraint-free, from s successes in n.
double clopper_pearson_lb(int successes, int n, double upsilon);

struct RiskSummary {
  double mean = 0.0;
  double std = 0.0;
  bool std_defined = true;  // false for a single sample (std reported as 0)
  double var_beta = 0.0;
  double cvar_beta = 0.0;
  double beta = 0.2;
  int n_samples = 0;
  int successes = 0;
  double f_sa = 0.0;
  double f_lb = 0.0;
  double confidence = 0.95;
};

/// Statistics over raw returns, success flags per episode (true = no
/// violation). Standard deviation is the population one.
RiskSummary summarize(std::span<const double> returns, std::span<const char> success, double beta = 0.2,
                      double upsilon = 0.05);

nlohmann::json to_json(const RiskSummary& summary);

enum class ObjectiveKind { MeanPenalized, CVaRPenalized };

struct ObjectiveMode {
  ObjectiveKind kind = ObjectiveKind::MeanPenalized;
  double beta = 0.2;

  void validate() const;
};

std::string to_string(ObjectiveKind kind);

/// Mean or CVaR of the penalized returns.
double objective(std::span<const double> penalized_returns, const ObjectiveMode& mode);

}  // namespace psched
