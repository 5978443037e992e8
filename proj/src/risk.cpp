#include "psched/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "psched/common.hpp"

namespace psched {

namespace {

void check_beta(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("beta must lie in (0, 1]");
}

std::size_t order_index(std::size_t n, double beta) {
  // The epsilon keeps beta * n = 100 from flooring to 99 when beta = 0.2.
  const auto k = static_cast<std::size_t>(std::floor(beta * static_cast<double>(n) + 1e-9));
  return std::max<std::size_t>(1, k);
}

// Lentz's method for the incomplete beta continued fraction.
double beta_continued_fraction(double x, double a, double b) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double var_estimate(std::span<const double> samples, double beta) {
  if (samples.empty()) throw DomainError("VaR of an empty sample set");
  check_beta(beta);
  std::vector<double> sorted(samples.begin(), samples.end());
  const std::size_t k = order_index(sorted.size(), beta);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  return sorted[k - 1];
}

double cvar_estimate(std::span<const double> samples, double beta) {
  const double z = var_estimate(samples, beta);
  double tail = 0.0;
  for (double v : samples) tail += std::min(0.0, v - z);
  return z + tail / (beta * static_cast<double>(samples.size()));
}

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double inverse_incomplete_beta(double p, double a, double b) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability must lie in [0, 1]");
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (regularized_incomplete_beta(mid, a, b) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double clopper_pearson_lb(int successes, int n, double upsilon) {
  if (!(upsilon > 0.0 && upsilon < 1.0)) throw DomainError("upsilon must lie in (0, 1)");
  if (n < 1 || successes < 0 || successes > n) throw DomainError("need 0 <= successes <= n and n >= 1");
  if (successes == 0) return 0.0;
  if (successes == n) return std::pow(1.0 - upsilon, 1.0 / n);
  return 1.0 - inverse_incomplete_beta(upsilon, n + 1.0 - successes, successes);
}

RiskSummary summarize(std::span<const double> returns, std::span<const char> success, double beta, double upsilon) {
  if (returns.empty()) throw DomainError("cannot summarize an empty sample set");
  if (success.size() != returns.size()) throw DomainError("returns and success flags differ in length");
  RiskSummary s;
  const auto n = static_cast<double>(returns.size());
  s.n_samples = static_cast<int>(returns.size());
  s.mean = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
  double sq = 0.0;
  for (double v : returns) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / n);
  s.std_defined = returns.size() >= 2;
  if (!s.std_defined) s.std = 0.0;
  s.beta = beta;
  s.var_beta = var_estimate(returns, beta);
  s.cvar_beta = cvar_estimate(returns, beta);
  s.successes = static_cast<int>(std::count_if(success.begin(), success.end(), [](char c) { return c != 0; }));
  s.f_sa = s.successes / n;
  s.f_lb = clopper_pearson_lb(s.successes, s.n_samples, upsilon);
  s.confidence = 1.0 - upsilon;
  return s;
}

nlohmann::json to_json(const RiskSummary& s) {
  return nlohmann::json{{"mean", s.mean},           {"std", s.std},
                        {"std_defined", s.std_defined}, {"var_beta", s.var_beta},
                        {"cvar_beta", s.cvar_beta},  {"beta", s.beta},
                        {"n_samples", s.n_samples},  {"successes", s.successes},
                        {"f_sa", s.f_sa},            {"f_lb", s.f_lb},
                        {"confidence", s.confidence}};
}

void ObjectiveMode::validate() const {
  if (kind == ObjectiveKind::CVaRPenalized) check_beta(beta);
}

std::string to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::MeanPenalized ? "mean_penalized" : "cvar_penalized";
}

double objective(std::span<const double> penalized, const ObjectiveMode& mode) {
  if (penalized.empty()) throw DomainError("objective of an empty sample set");
  if (mode.kind == ObjectiveKind::CVaRPenalized) return cvar_estimate(penalized, mode.beta);
  return std::accumulate(penalized.begin(), penalized.end(), 0.0) / static_cast<double>(penalized.size());
}

}  // namespace psched
