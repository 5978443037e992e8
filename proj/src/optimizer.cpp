#include "psched/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "psched/common.hpp"

namespace psched {

using nlohmann::json;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

json score_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double score_from(const json& v) { return v.is_null() ? kNegInf : v.get<double>(); }

json detail_json(const CandidateScore& c) {
  json j{{"objective", score_json(c.objective)}};
  if (c.summary) j["summary"] = to_json(*c.summary);
  return j;
}

RiskSummary summary_from_json(const json& j) {
  RiskSummary s;
  s.mean = j.at("mean").get<double>();
  s.std = j.at("std").get<double>();
  s.std_defined = j.at("std_defined").get<bool>();
  s.var_beta = j.at("var_beta").get<double>();
  s.cvar_beta = j.at("cvar_beta").get<double>();
  s.beta = j.at("beta").get<double>();
  s.n_samples = j.at("n_samples").get<int>();
  s.successes = j.at("successes").get<int>();
  s.f_sa = j.at("f_sa").get<double>();
  s.f_lb = j.at("f_lb").get<double>();
  s.confidence = j.at("confidence").get<double>();
  return s;
}

CandidateScore detail_from_json(const json& j) {
  CandidateScore c;
  c.objective = score_from(j.at("objective"));
  if (j.contains("summary")) c.summary = summary_from_json(j.at("summary"));
  return c;
}

CandidateScore safe_call(const ObjectiveFn& objective, std::span<const double> theta, std::uint64_t seed,
                         bool& failed) {
  failed = false;
  try {
    CandidateScore c = objective(theta, seed);
    if (std::isnan(c.objective)) {
      failed = true;
      c.objective = kNegInf;
    }
    return c;
  } catch (const std::exception& e) {
    warn(std::string("candidate evaluation failed: ") + e.what());
  }
  failed = true;
  return CandidateScore{};
}

void offer(SwarmState& st, std::size_t i, std::span<const double> theta, const CandidateScore& c) {
  if (c.objective > st.personal_best_score[i]) {
    st.personal_best[i].assign(theta.begin(), theta.end());
    st.personal_best_score[i] = c.objective;
    st.personal_best_detail[i] = c;
  }
  if (c.objective > st.global_best_score) {
    st.global_best.assign(theta.begin(), theta.end());
    st.global_best_score = c.objective;
    st.global_best_detail = c;
  }
}

void clamp_particle(SwarmState& st, std::size_t i) {
  for (std::size_t d = 0; d < st.dim(); ++d) {
    st.positions[i][d] = std::clamp(st.positions[i][d], st.lb[d], st.ub[d]);
    st.velocities[i][d] = std::clamp(st.velocities[i][d], -st.vmax[d], st.vmax[d]);
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("override " + key + ": '" + value + "' is not a number");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  if (v != std::floor(v)) throw ConfigError("override " + key + ": '" + value + "' is not an integer");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("override " + key + ": '" + value + "' is not a boolean");
}

}  // namespace

void SwarmConfig::validate(std::size_t dim) const {
  if (population < 1) throw ConfigError("population must be >= 1");
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (!(c3 > 0.0 && c3 <= 1.0)) throw ConfigError("c3 must lie in (0, 1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (neighborhood < 1 || neighborhood > population) throw ConfigError("neighborhood must lie in [1, population]");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (sa_every < 0 || ssr_every < 0) throw ConfigError("trigger cadences must be >= 0");
  if (!(sa_step_scale >= 0.0)) throw ConfigError("sa_step_scale must be >= 0");
  if (omega < 0.0 || c1 < 0.0 || c2 < 0.0) throw ConfigError("PSO coefficients must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!lower_bounds.empty() && lower_bounds.size() != dim) throw ConfigError("lower_bounds has the wrong length");
  if (!upper_bounds.empty() && upper_bounds.size() != dim) throw ConfigError("upper_bounds has the wrong length");
  for (std::size_t d = 0; d < dim; ++d) {
    const double lo = lower_bounds.empty() ? lower : lower_bounds[d];
    const double hi = upper_bounds.empty() ? upper : upper_bounds[d];
    if (!(lo < hi)) throw ConfigError("lower bound must be below upper bound in dimension " + std::to_string(d));
  }
}

json to_json(const SwarmConfig& c) {
  json j{{"population", c.population},
         {"iterations", c.iterations},
         {"omega", c.omega},
         {"c1", c.c1},
         {"c2", c.c2},
         {"c3", c.c3},
         {"neighborhood", c.neighborhood},
         {"lower", c.lower},
         {"upper", c.upper},
         {"alpha", c.alpha},
         {"temperature", c.temperature},
         {"sa_every", c.sa_every},
         {"ssr_every", c.ssr_every},
         {"sa_step_scale", c.sa_step_scale},
         {"per_dimension_random", c.per_dimension_random},
         {"metropolis", c.metropolis},
         {"strict_reduction", c.strict_reduction},
         {"seed", c.seed}};
  if (!c.lower_bounds.empty()) j["lower_bounds"] = c.lower_bounds;
  if (!c.upper_bounds.empty()) j["upper_bounds"] = c.upper_bounds;
  return j;
}

void apply_override(SwarmConfig& c, const std::string& key, const std::string& value) {
  if (key == "population" || key == "pop") c.population = parse_int(key, value);
  else if (key == "iterations" || key == "iters") c.iterations = parse_int(key, value);
  else if (key == "omega") c.omega = parse_double(key, value);
  else if (key == "c1") c.c1 = parse_double(key, value);
  else if (key == "c2") c.c2 = parse_double(key, value);
  else if (key == "c3") c.c3 = parse_double(key, value);
  else if (key == "neighborhood" || key == "n_h") c.neighborhood = parse_int(key, value);
  else if (key == "lower") c.lower = parse_double(key, value);
  else if (key == "upper") c.upper = parse_double(key, value);
  else if (key == "alpha") c.alpha = parse_double(key, value);
  else if (key == "temperature" || key == "T") c.temperature = parse_double(key, value);
  else if (key == "sa_every") c.sa_every = parse_int(key, value);
  else if (key == "ssr_every") c.ssr_every = parse_int(key, value);
  else if (key == "sa_step_scale") c.sa_step_scale = parse_double(key, value);
  else if (key == "per_dimension_random") c.per_dimension_random = parse_bool(key, value);
  else if (key == "metropolis") c.metropolis = parse_bool(key, value);
  else if (key == "strict_reduction") c.strict_reduction = parse_bool(key, value);
  else throw ConfigError("unknown optimizer setting '" + key + "'");
}

SwarmState init_population(const SwarmConfig& config, std::size_t dim) {
  config.validate(dim);
  if (dim == 0) throw ConfigError("search space has no dimensions");
  SwarmState st;
  st.rng.seed(derive_seed(config.seed, {0}));
  st.lb.resize(dim);
  st.ub.resize(dim);
  st.vmax.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    st.lb[d] = config.lower_bounds.empty() ? config.lower : config.lower_bounds[d];
    st.ub[d] = config.upper_bounds.empty() ? config.upper : config.upper_bounds[d];
    st.vmax[d] = config.c3 * (st.ub[d] - st.lb[d]);
  }
  const auto p = static_cast<std::size_t>(config.population);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  st.positions.assign(p, std::vector<double>(dim));
  st.velocities.assign(p, std::vector<double>(dim));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t d = 0; d < dim; ++d) st.positions[i][d] = st.lb[d] + unit(st.rng) * (st.ub[d] - st.lb[d]);
    for (std::size_t d = 0; d < dim; ++d) {
      const double v = (2.0 * unit(st.rng) - 1.0) * (st.ub[d] - st.lb[d]);
      st.velocities[i][d] = std::clamp(v, -st.vmax[d], st.vmax[d]);
    }
  }
  st.scores.assign(p, kNegInf);
  st.personal_best = st.positions;
  st.personal_best_score.assign(p, kNegInf);
  st.personal_best_detail.assign(p, CandidateScore{});
  st.global_best = st.positions.front();
  return st;
}

std::size_t neighborhood_best(const SwarmState& st, std::size_t i, int neighborhood) {
  const auto p = static_cast<long>(st.size());
  const long before = neighborhood / 2;
  const long after = neighborhood - 1 - before;
  std::size_t best = i;
  for (long off = -before; off <= after; ++off) {
    const auto j = static_cast<std::size_t>(((static_cast<long>(i) + off) % p + p) % p);
    if (st.personal_best_score[j] > st.personal_best_score[best]) best = j;
  }
  return best;
}

void move_particle(std::span<double> x, std::span<double> v, std::span<const double> b, std::span<const double> g,
                   std::span<const double> r1, std::span<const double> r2, const SwarmConfig& c,
                   std::span<const double> vmax, std::span<const double> lb, std::span<const double> ub) {
  const bool scalar = r1.size() == 1;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double a = scalar ? r1[0] : r1[d];
    const double e = scalar ? r2[0] : r2[d];
    const double nv = c.omega * v[d] + c.c1 * a * (b[d] - x[d]) + c.c2 * e * (g[d] - x[d]);
    v[d] = std::clamp(nv, -vmax[d], vmax[d]);
    x[d] = std::clamp(x[d] + v[d], lb[d], ub[d]);
  }
}

bool sa_accept(double delta, double z, double temperature, bool metropolis) {
  if (delta > 0.0) return true;
  const double threshold = std::exp(delta / temperature);
  return metropolis ? z < threshold : z >= threshold;
}

void pso_step(SwarmState& st, const SwarmConfig& config) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n_r = config.per_dimension_random ? st.dim() : 1;
  std::vector<double> r1(n_r), r2(n_r);
  // Neighborhood bests are taken before anyone moves.
  std::vector<std::size_t> local(st.size());
  for (std::size_t i = 0; i < st.size(); ++i) local[i] = neighborhood_best(st, i, config.neighborhood);
  for (std::size_t i = 0; i < st.size(); ++i) {
    for (auto& r : r1) r = unit(st.rng);
    for (auto& r : r2) r = unit(st.rng);
    move_particle(st.positions[i], st.velocities[i], st.personal_best[i], st.personal_best[local[i]], r1, r2, config,
                  st.vmax, st.lb, st.ub);
  }
}

void evaluate_population(SwarmState& st, const SwarmConfig& config, const ObjectiveFn& objective) {
  std::vector<CandidateScore> results(st.size());
  std::vector<char> failed(st.size(), 0);
  parallel_for(st.size(), config.workers, [&](std::size_t i) {
    bool f = false;
    results[i] = safe_call(objective, st.positions[i],
                           derive_seed(config.seed, {static_cast<std::uint64_t>(st.iteration), i, 0}), f);
    failed[i] = f;
  });
  for (std::size_t i = 0; i < st.size(); ++i) {
    st.scores[i] = results[i].objective;
    ++st.evaluations;
    st.failed_evaluations += failed[i];
    offer(st, i, st.positions[i], results[i]);
  }
}

void sa_step(SwarmState& st, const SwarmConfig& config, const ObjectiveFn& objective) {
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t p = st.size();
  std::vector<std::vector<double>> proposals(p, std::vector<double>(st.dim()));
  std::vector<double> z(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t d = 0; d < st.dim(); ++d) {
      const double w = sym(st.rng) * config.sa_step_scale * (st.ub[d] - st.lb[d]);
      proposals[i][d] = std::clamp(st.positions[i][d] + w, st.lb[d], st.ub[d]);
    }
    z[i] = unit(st.rng);
  }
  std::vector<CandidateScore> results(p);
  std::vector<char> failed(p, 0);
  parallel_for(p, config.workers, [&](std::size_t i) {
    bool f = false;
    results[i] = safe_call(objective, proposals[i],
                           derive_seed(config.seed, {static_cast<std::uint64_t>(st.iteration), i, 1}), f);
    failed[i] = f;
  });
  for (std::size_t i = 0; i < p; ++i) {
    ++st.evaluations;
    st.failed_evaluations += failed[i];
    offer(st, i, proposals[i], results[i]);
    const double current = st.scores[i];
    const double candidate = results[i].objective;
    bool accept = false;
    if (std::isinf(current) && current < 0) {
      accept = std::isfinite(candidate);
    } else if (std::isfinite(candidate)) {
      accept = sa_accept(candidate - current, z[i], config.temperature, config.metropolis);
    }
    if (accept) {
      st.positions[i] = proposals[i];
      st.scores[i] = candidate;
    }
  }
}

void reduce_space(SwarmState& st, const SwarmConfig& config) {
  if (!std::isfinite(st.global_best_score)) return;
  for (std::size_t d = 0; d < st.dim(); ++d) {
    const double best = st.global_best[d];
    if (config.strict_reduction) {
      st.lb[d] = st.lb[d] + config.alpha * (st.lb[d] - best);
    } else {
      st.lb[d] = st.lb[d] + config.alpha * (best - st.lb[d]);
    }
    st.ub[d] = st.ub[d] - config.alpha * (st.ub[d] - best);
    st.vmax[d] = config.c3 * (st.ub[d] - st.lb[d]);
  }
  for (std::size_t i = 0; i < st.size(); ++i) clamp_particle(st, i);
}

namespace {

HistoryRow history_row(const SwarmState& st) {
  HistoryRow row;
  row.iteration = st.iteration;
  row.best_objective = st.global_best_score;
  row.best_summary = st.global_best_detail.summary;
  return row;
}

}  // namespace

OptimizeResult optimize(const SwarmConfig& config, std::size_t dim, const ObjectiveFn& objective, SwarmState* resume,
                        const IterationCallback& on_iteration) {
  config.validate(dim);
  SwarmState st;
  if (resume != nullptr) {
    if (resume->dim() != dim || resume->size() != static_cast<std::size_t>(config.population)) {
      throw ConfigError("checkpoint does not match the search dimensions");
    }
    st = *resume;
  } else {
    st = init_population(config, dim);
    st.iteration = 0;
    evaluate_population(st, config, objective);
    st.history.push_back(history_row(st));
    if (on_iteration) on_iteration(st);
  }
  for (int k = st.iteration + 1; k <= config.iterations; ++k) {
    st.iteration = k;
    if (config.ssr_every > 0 && k % config.ssr_every == 0) reduce_space(st, config);
    if (config.sa_every > 0 && k % config.sa_every == 0) sa_step(st, config, objective);
    pso_step(st, config);
    evaluate_population(st, config, objective);
    st.history.push_back(history_row(st));
    if (on_iteration) on_iteration(st);
  }
  if (resume != nullptr) *resume = st;
  OptimizeResult out;
  out.best = st.global_best;
  out.best_score = st.global_best_score;
  out.best_detail = st.global_best_detail;
  out.history = st.history;
  out.evaluations = st.evaluations;
  out.failed_evaluations = st.failed_evaluations;
  return out;
}

void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history) {
  out << "iteration,best_J,mean,std,var_beta,cvar_beta,f_lb\n";
  out << std::setprecision(17);
  for (const HistoryRow& r : history) {
    out << r.iteration << ',' << r.best_objective;
    if (r.best_summary) {
      const RiskSummary& s = *r.best_summary;
      out << ',' << s.mean << ',' << s.std << ',' << s.var_beta << ',' << s.cvar_beta << ',' << s.f_lb;
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
}

json checkpoint_to_json(const SwarmState& st) {
  json hist = json::array();
  for (const HistoryRow& r : st.history) {
    json row{{"iteration", r.iteration}, {"best_objective", score_json(r.best_objective)}};
    if (r.best_summary) row["summary"] = to_json(*r.best_summary);
    hist.push_back(std::move(row));
  }
  json scores = json::array();
  for (double v : st.scores) scores.push_back(score_json(v));
  json pdetail = json::array();
  for (const auto& d : st.personal_best_detail) pdetail.push_back(detail_json(d));
  std::ostringstream rng;
  rng << st.rng;
  return json{{"schema_version", 1},
              {"iteration", st.iteration},
              {"positions", st.positions},
              {"velocities", st.velocities},
              {"scores", std::move(scores)},
              {"personal_best", st.personal_best},
              {"personal_best_detail", std::move(pdetail)},
              {"global_best", st.global_best},
              {"global_best_detail", detail_json(st.global_best_detail)},
              {"lb", st.lb},
              {"ub", st.ub},
              {"vmax", st.vmax},
              {"history", std::move(hist)},
              {"rng", rng.str()},
              {"evaluations", st.evaluations},
              {"failed_evaluations", st.failed_evaluations}};
}

SwarmState checkpoint_from_json(const json& doc) {
  try {
    if (doc.at("schema_version").get<int>() != 1) throw ParseError("checkpoint: unsupported schema_version");
    SwarmState st;
    st.iteration = doc.at("iteration").get<int>();
    st.positions = doc.at("positions").get<std::vector<std::vector<double>>>();
    st.velocities = doc.at("velocities").get<std::vector<std::vector<double>>>();
    for (const auto& v : doc.at("scores")) st.scores.push_back(score_from(v));
    st.personal_best = doc.at("personal_best").get<std::vector<std::vector<double>>>();
    for (const auto& d : doc.at("personal_best_detail")) {
      st.personal_best_detail.push_back(detail_from_json(d));
      st.personal_best_score.push_back(st.personal_best_detail.back().objective);
    }
    st.global_best = doc.at("global_best").get<std::vector<double>>();
    st.global_best_detail = detail_from_json(doc.at("global_best_detail"));
    st.global_best_score = st.global_best_detail.objective;
    st.lb = doc.at("lb").get<std::vector<double>>();
    st.ub = doc.at("ub").get<std::vector<double>>();
    st.vmax = doc.at("vmax").get<std::vector<double>>();
    for (const auto& r : doc.at("history")) {
      HistoryRow row;
      row.iteration = r.at("iteration").get<int>();
      row.best_objective = score_from(r.at("best_objective"));
      if (r.contains("summary")) row.best_summary = summary_from_json(r.at("summary"));
      st.history.push_back(std::move(row));
    }
    std::istringstream rng(doc.at("rng").get<std::string>());
    rng >> st.rng;
    if (!rng) throw ParseError("checkpoint: unreadable generator state");
    st.evaluations = doc.at("evaluations").get<long>();
    st.failed_evaluations = doc.at("failed_evaluations").get<long>();
    const std::size_t p = st.positions.size();
    if (st.velocities.size() != p || st.scores.size() != p || st.personal_best.size() != p ||
        st.personal_best_detail.size() != p) {
      throw ParseError("checkpoint: population arrays differ in length");
    }
    return st;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace psched
