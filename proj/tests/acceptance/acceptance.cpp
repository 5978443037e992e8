// Acceptance run. `acceptance <id>...` evaluates the named criteria (c1..c9,
// or `all`) and prints one PASS/FAIL line each; the exit code is the number
// of failures.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "psched/common.hpp"
#include "psched/harness.hpp"
#include "psched/optimizer.hpp"
#include "psched/risk.hpp"
#include "support/micro_oracle.hpp"

using namespace psched;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? " " : "") + num(v[k]);
  return s;
}

double best_training_objective(const std::string& id, const std::string& instance, std::uint64_t seed,
                               const std::vector<std::pair<std::string, std::string>>& overrides) {
  TrainingOptions opts;
  for (const auto& [k, v] : overrides) apply_override(opts.swarm, k, v);
  return train_policy(experiment_config(id, instance), seed, opts).search.best_score;
}

Verdict deterministic_band(const std::string& instance, const std::string& id, double target, double band,
                           const std::vector<std::pair<std::string, std::string>>& overrides, std::string& detail) {
  std::vector<double> got;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) got.push_back(best_training_objective(id, instance, seed, overrides));
  const double best = *std::max_element(got.begin(), got.end());
  const double floor = target * (1.0 + band);
  detail += id + " best " + num(best) + " (need >= " + num(floor) + ", reference " + num(target) + "; seeds " +
            join(got) + ") ";
  return {best >= floor, ""};
}

Verdict c1() {
  std::string d;
  const bool e1 = deterministic_band("instance1", "E1", -62.0, 0.05, {}, d).pass;
  const bool e2 = deterministic_band("instance1", "E2", -65.0, 0.05, {}, d).pass;
  return {e1 && e2, d};
}

Verdict c2() {
  // Inertia raised to 0.9 for the larger plant; see README.
  const std::vector<std::pair<std::string, std::string>> ov{{"omega", "0.9"}};
  std::string d = "omega 0.9: ";
  const bool e1 = deterministic_band("instance2", "E1", -107.0, 0.05, ov, d).pass;
  const bool e2 = deterministic_band("instance2", "E2", -137.0, 0.10, ov, d).pass;
  return {e1 && e2, d};
}

Verdict c3() {
  bool pass = true;
  std::string d;
  const ViolationKind hard[] = {ViolationKind::Sequencing, ViolationKind::Cleaning, ViolationKind::Release,
                                ViolationKind::CampaignCompletion, ViolationKind::LaneOverlap,
                                ViolationKind::Eligibility, ViolationKind::Restart};
  for (const char* instance : {"instance1", "instance2"}) {
    const ExperimentConfig e8 = experiment_config("E8", instance);
    TrainingOptions opts;
    if (std::string(instance) == "instance2") opts.swarm.iterations = 50;
    const Policy p = train_policy(e8, 1, opts).policy;
    const ValidationReport r = validate_policy(p, e8, 500, validation_seed(1));
    int violations = 0;
    for (ViolationKind k : hard) violations += r.violation_counts[static_cast<std::size_t>(k)];
    pass = pass && violations == 0 && r.summary.f_lb >= 0.95 && r.summary.n_samples == 500;
    d += std::string(instance) + " E8: rule violations " + std::to_string(violations) + ", double allocations " +
         std::to_string(r.violation_counts[static_cast<std::size_t>(ViolationKind::DoubleAllocation)]) +
         ", F_LB " + num(r.summary.f_lb) + "; ";
  }
  return {pass, d};
}

// P(Bin(n, x) >= k), written out term by term.
double binomial_upper_tail(double x, int n, int k) {
  double s = 0.0;
  for (int j = k; j <= n; ++j) {
    s += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * std::log(x) +
                  (n - j) * std::log1p(-x));
  }
  return s;
}

// 1 - x where I_x(n + 1 - s, s) = upsilon, by bisection on the binomial tail.
double lower_bound_oracle(int s, int n, double upsilon) {
  const int a = n + 1 - s, b = s;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (binomial_upper_tail(mid, a + b - 1, a) < upsilon ? lo : hi) = mid;
  }
  return 1.0 - 0.5 * (lo + hi);
}

Verdict c4() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(1, 200);
  std::uniform_real_distribution<double> val(-300.0, 20.0), bet(0.01, 1.0);
  double worst_bf = 0.0, worst_mean = 0.0, worst_eq = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> z(static_cast<std::size_t>(size(rng)));
    for (double& v : z) v = val(rng);
    const double beta = bet(rng);
    std::vector<double> sorted = z;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(beta * z.size() + 1e-9)));
    const double var = sorted[k - 1];
    double tail = 0.0;
    for (double v : z) tail += std::min(0.0, v - var);
    const double brute = var + tail / (beta * z.size());
    const double c = cvar_estimate(z, beta);
    const double scale = std::max(1.0, std::fabs(c));
    worst_bf = std::max(worst_bf, std::fabs(c - brute) / scale);
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= z.size();
    worst_mean = std::max(worst_mean, std::fabs(cvar_estimate(z, 1.0) - mean) / std::max(1.0, std::fabs(mean)));
    std::vector<double> moved = z;
    for (double& v : moved) v = 3.0 * v - 17.0;
    worst_eq = std::max(worst_eq, std::fabs(cvar_estimate(moved, beta) - (3.0 * c - 17.0)) / (3.0 * scale));
  }
  double worst_closed = 0.0, worst_oracle = 0.0;
  for (int n : {1, 10, 50, 500, 2000}) {
    worst_closed = std::max(worst_closed, std::fabs(clopper_pearson_lb(n, n, 0.05) - std::pow(0.95, 1.0 / n)));
    for (int s : {1, n / 3, n / 2, n - 1}) {
      if (s < 1) continue;
      worst_oracle = std::max(worst_oracle, std::fabs(clopper_pearson_lb(s, n, 0.05) - lower_bound_oracle(s, n, 0.05)));
    }
  }
  const bool pass = worst_bf <= 1e-12 && worst_mean <= 1e-12 && worst_eq <= 1e-12 && worst_closed <= 1e-10 &&
                    worst_oracle <= 1e-9;
  return {pass, "max rel. error vs brute force " + num(worst_bf) + ", beta=1 vs mean " + num(worst_mean) +
                    ", equivariance " + num(worst_eq) + "; lower bound vs closed form " + num(worst_closed) +
                    ", vs binomial-tail oracle " + num(worst_oracle)};
}

CandidateScore sphere(std::span<const double> x, std::uint64_t) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return {-s, std::nullopt};
}

Verdict c5() {
  bool props = true;
  std::vector<double> best2, best50;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (std::size_t dim : {std::size_t{2}, std::size_t{50}}) {
      SwarmConfig cfg;
      cfg.seed = seed;
      if (dim == 2) {
        cfg.population = 20;
        cfg.iterations = 50;
      } else {
        cfg.iterations = 1000;  // default swarm otherwise; 150 iterations stall near -3 in 50-D
      }
      std::vector<double> lb_prev, ub_prev;
      bool nested = true;
      auto watch = [&](const SwarmState& st) {
        for (std::size_t d = 0; d < st.dim(); ++d) {
          if (!lb_prev.empty() && (st.lb[d] < lb_prev[d] || st.ub[d] > ub_prev[d])) nested = false;
          if (std::isfinite(st.global_best_score) && (st.global_best[d] < st.lb[d] || st.global_best[d] > st.ub[d]))
            nested = false;
        }
        lb_prev = st.lb;
        ub_prev = st.ub;
      };
      const OptimizeResult r = optimize(cfg, dim, sphere, nullptr, watch);
      bool monotone = true;
      for (std::size_t k = 1; k < r.history.size(); ++k)
        monotone = monotone && r.history[k].best_objective >= r.history[k - 1].best_objective;
      SwarmConfig par = cfg;
      par.workers = 3;
      const OptimizeResult again = optimize(par, dim, sphere);
      const bool same = again.best == r.best && again.best_score == r.best_score;
      props = props && monotone && nested && same;
      (dim == 2 ? best2 : best50).push_back(r.best_score);
    }
  }
  const bool reach2 = std::all_of(best2.begin(), best2.end(), [](double v) { return v >= -1e-2; });
  const bool reach50 = std::all_of(best50.begin(), best50.end(), [](double v) { return v >= -1.0; });
  return {reach2 && reach50 && props, "2-D best " + join(best2) + " (P=20, K=50, need >= -0.01); 50-D best " + join(best50) +
                                          " (P=60, K=1000, need >= -1); monotone/nested/deterministic " + (props ? "yes" : "no")};
}

Verdict c6() {
  const testing::ExhaustiveComparison c = testing::compare_exhaustively();
  const bool pass = c.mismatches == 0 && c.best_env == c.best_oracle && c.best_env == -14.0;
  return {pass, std::to_string(c.nodes) + " transitions, " + std::to_string(c.leaves) + " complete sequences, " +
                    std::to_string(c.mismatches) + " mismatches; optimum env " + num(c.best_env) + ", oracle " +
                    num(c.best_oracle) + ", hand value -14"};
}

Verdict c7() {
  int wins = 0;
  std::string d;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double cvar[2];
    int k = 0;
    for (const char* id : {"E8", "D8"}) {
      const ExperimentConfig cfg = experiment_config(id, "instance1");
      const Policy p = train_policy(cfg, seed, TrainingOptions{}).policy;
      cvar[k++] = validate_policy(p, cfg, 500, validation_seed(seed)).summary.cvar_beta;
    }
    wins += cvar[1] >= cvar[0];
    d += "seed " + std::to_string(seed) + ": E8 " + num(cvar[0]) + " D8 " + num(cvar[1]) + "; ";
  }
  return {wins >= 4, "D8 CVaR >= E8 CVaR in " + std::to_string(wins) + "/5 (need 4). " + d};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Verdict c8(const std::string& cli) {
  const fs::path work = fs::temp_directory_path() / "psched_acceptance_c8";
  fs::remove_all(work);
  std::vector<std::string> metrics;
  bool ok = true;
  for (int workers : {1, 1, 4}) {
    const fs::path out = work / ("w" + std::to_string(metrics.size()));
    const std::string base = cli + " train --experiment E8 --pop 12 --iters 4 --samples 10 --mc 100 --seed 9 --workers " +
                             std::to_string(workers) + " --out " + out.string();
    ok = ok && run(base) == 0;
    ok = ok && run(cli + " validate --policy " + (out / "policy.json").string() + " --mc 200 --seed 3 --workers " +
                   std::to_string(workers) + " --out " + (out / "val").string()) == 0;
    metrics.push_back(slurp(out / "metrics.json") + slurp(out / "training.csv") + slurp(out / "policy.json") +
                      slurp(out / "val" / "metrics.json"));
  }
  const bool same = ok && !metrics[0].empty() && metrics[0] == metrics[1] && metrics[0] == metrics[2];
  fs::remove_all(work);
  return {same, std::string("train + validate run three times (workers 1, 1, 4): outputs ") +
                    (ok ? (same ? "byte-identical" : "differ") : "command failed")};
}

Verdict c9() {
  const ProblemInstance inst = builtin_instance("instance2");
  const NetworkSpec spec = network_for(inst);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> theta(param_count(spec));
  for (double& v : theta) v = u(rng);
  const LatencyStats s = measure_decision_latency(Policy(spec, theta), inst, 10000, 1);
  return {s.p95_us < 1000.0, "instance2, " + std::to_string(s.n) + " decisions: p50 " + num(s.p50_us) + " us, p95 " +
                                 num(s.p95_us) + " us, max " + num(s.max_us) + " us (need p95 < 1000 us)"};
}

}  // namespace

int main(int argc, char** argv) {
  set_warnings_enabled(false);
  std::string cli = PSCHED_CLI_PATH;
  std::vector<std::string> wanted;
  for (int k = 1; k < argc; ++k) {
    const std::string a = argv[k];
    if (a == "--cli" && k + 1 < argc) {
      cli = argv[++k];
    } else if (a == "all") {
      for (int c = 1; c <= 9; ++c) wanted.push_back("c" + std::to_string(c));
    } else {
      wanted.push_back(a);
    }
  }
  if (wanted.empty()) {
    std::cerr << "usage: acceptance c1..c9|all [--cli path]\n";
    return 2;
  }
  const std::map<std::string, std::pair<std::string, std::function<Verdict()>>> table{
      {"c1", {"deterministic optimality, instance 1", c1}},
      {"c2", {"deterministic optimality, instance 2", c2}},
      {"c3", {"schedule feasibility over 500 episodes", c3}},
      {"c4", {"risk estimator oracles", c4}},
      {"c5", {"optimizer sanity on the sphere", c5}},
      {"c6", {"dynamics against the exhaustive micro oracle", c6}},
      {"c7", {"CVaR training improves the lower tail (E8 vs D8)", c7}},
      {"c8", {"byte-identical outputs across repeats and workers", [&] { return c8(cli); }}},
      {"c9", {"per-decision latency", c9}},
  };
  int failures = 0;
  for (const std::string& id : wanted) {
    const auto it = table.find(id);
    if (it == table.end()) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    Verdict v;
    try {
      v = it->second.second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << id << " " << it->second.first << ": " << v.detail << std::endl;
  }
  return failures;
}
