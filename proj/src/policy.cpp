#include "psched/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "psched/common.hpp"

namespace psched {

using nlohmann::json;

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu6: return "relu6";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "relu6") return Activation::Relu6;
  throw ConfigError("unknown activation '" + name + "'");
}

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Relu6: return std::clamp(x, 0.0, 6.0);
  }
  return x;
}

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

}  // namespace

void NetworkSpec::validate() const {
  if (input_dim < 1 || h1 < 1 || h2 < 1 || h3 < 1 || output_dim < 1) {
    throw ConfigError("network layer sizes must be positive");
  }
}

NetworkSpec network_for(const ProblemInstance& instance) {
  NetworkSpec spec;
  spec.input_dim = instance.state_dim();
  spec.output_dim = instance.num_units();
  return spec;
}

std::size_t param_count(const NetworkSpec& s) {
  s.validate();
  return sz(s.h1) * sz(s.input_dim) + sz(s.h1) + sz(s.h2) * sz(s.h1) + sz(s.h2) * sz(s.h2) + sz(s.h2) +
         sz(s.h3) * sz(s.h2) + sz(s.h3) + sz(s.output_dim) * sz(s.h3) + sz(s.output_dim);
}

LayerWeights decode(const NetworkSpec& s, std::span<const double> theta) {
  if (theta.size() != param_count(s)) {
    throw ConfigError("parameter vector has length " + std::to_string(theta.size()) + ", network needs " +
                      std::to_string(param_count(s)));
  }
  LayerWeights w;
  std::size_t k = 0;
  auto take = [&](std::vector<double>& dst, std::size_t n) {
    dst.assign(theta.begin() + static_cast<std::ptrdiff_t>(k), theta.begin() + static_cast<std::ptrdiff_t>(k + n));
    k += n;
  };
  take(w.w1, sz(s.h1) * sz(s.input_dim));
  take(w.b1, sz(s.h1));
  take(w.w2, sz(s.h2) * sz(s.h1));
  take(w.u2, sz(s.h2) * sz(s.h2));
  take(w.b2, sz(s.h2));
  take(w.w3, sz(s.h3) * sz(s.h2));
  take(w.b3, sz(s.h3));
  take(w.w4, sz(s.output_dim) * sz(s.h3));
  take(w.b4, sz(s.output_dim));
  return w;
}

std::vector<double> encode(const NetworkSpec& s, const LayerWeights& w) {
  const std::pair<const std::vector<double>*, std::size_t> parts[] = {
      {&w.w1, sz(s.h1) * sz(s.input_dim)}, {&w.b1, sz(s.h1)},  {&w.w2, sz(s.h2) * sz(s.h1)},
      {&w.u2, sz(s.h2) * sz(s.h2)},        {&w.b2, sz(s.h2)},  {&w.w3, sz(s.h3) * sz(s.h2)},
      {&w.b3, sz(s.h3)},                   {&w.w4, sz(s.output_dim) * sz(s.h3)}, {&w.b4, sz(s.output_dim)},
  };
  std::vector<double> theta;
  theta.reserve(param_count(s));
  for (const auto& [vec, n] : parts) {
    if (vec->size() != n) throw ConfigError("layer weight block has the wrong size");
    theta.insert(theta.end(), vec->begin(), vec->end());
  }
  return theta;
}

void normalize_state(const PlantState& state, const ProblemInstance& instance, std::span<double> out, bool normalize) {
  state.observation(out);
  if (!normalize) return;
  const int n = instance.num_tasks();
  const int nu = instance.num_units();
  const double horizon = instance.horizon();
  std::size_t k = 0;
  for (int i = 1; i <= n; ++i) out[k++] /= instance.order_size(i);
  for (int l = 0; l < nu; ++l) out[k++] /= instance.idle_code();
  for (int l = 0; l < nu; ++l) out[k++] /= horizon;
  for (int i = 0; i < n; ++i) out[k++] /= horizon;
  out[k] /= horizon;
}

std::vector<double> normalize_state(const PlantState& state, const ProblemInstance& instance, bool normalize) {
  std::vector<double> out(static_cast<std::size_t>(instance.state_dim()));
  normalize_state(state, instance, out, normalize);
  return out;
}

Policy::Policy(NetworkSpec spec, std::vector<double> theta) : spec_(spec), theta_(std::move(theta)) {
  if (theta_.size() != param_count(spec_)) {
    throw ConfigError("parameter vector has length " + std::to_string(theta_.size()) + ", network needs " +
                      std::to_string(param_count(spec_)));
  }
  for (double v : theta_) {
    if (!std::isfinite(v)) throw DomainError("policy parameters must be finite");
  }
  off_b1_ = sz(spec_.h1) * sz(spec_.input_dim);
  off_w2_ = off_b1_ + sz(spec_.h1);
  off_u2_ = off_w2_ + sz(spec_.h2) * sz(spec_.h1);
  off_b2_ = off_u2_ + sz(spec_.h2) * sz(spec_.h2);
  off_w3_ = off_b2_ + sz(spec_.h2);
  off_b3_ = off_w3_ + sz(spec_.h3) * sz(spec_.h2);
  off_w4_ = off_b3_ + sz(spec_.h3);
  off_b4_ = off_w4_ + sz(spec_.output_dim) * sz(spec_.h3);
}

void Policy::forward(std::span<const double> x, HiddenState& hidden, std::span<double> latent) const {
  const std::size_t in = sz(spec_.input_dim), n1 = sz(spec_.h1), n2 = sz(spec_.h2), n3 = sz(spec_.h3),
                    out = sz(spec_.output_dim);
  if (x.size() != in) throw StateError("feature vector has the wrong length");
  if (latent.size() != out) throw StateError("latent buffer has the wrong length");
  if (hidden.h.size() != n2) throw StateError("hidden state has the wrong length");
  for (double v : x) {
    if (!std::isfinite(v)) throw DomainError("non-finite policy input");
  }
  // Small fixed-width layers; stack buffers keep the hot path allocation free.
  constexpr std::size_t kStack = 64;
  double a1_stack[kStack], a2_stack[kStack], a3_stack[kStack];
  std::vector<double> heap;
  double* a1 = a1_stack;
  double* a2 = a2_stack;
  double* a3 = a3_stack;
  if (n1 > kStack || n2 > kStack || n3 > kStack) {
    heap.resize(n1 + n2 + n3);
    a1 = heap.data();
    a2 = a1 + n1;
    a3 = a2 + n2;
  }
  const double* th = theta_.data();
  for (std::size_t r = 0; r < n1; ++r) {
    double acc = th[off_b1_ + r];
    const double* row = th + r * in;
    for (std::size_t c = 0; c < in; ++c) acc += row[c] * x[c];
    a1[r] = activate(spec_.h1_activation, acc);
  }
  for (std::size_t r = 0; r < n2; ++r) {
    double acc = th[off_b2_ + r];
    const double* row = th + off_w2_ + r * n1;
    for (std::size_t c = 0; c < n1; ++c) acc += row[c] * a1[c];
    const double* rec = th + off_u2_ + r * n2;
    for (std::size_t c = 0; c < n2; ++c) acc += rec[c] * hidden.h[c];
    a2[r] = std::tanh(acc);
  }
  std::copy(a2, a2 + n2, hidden.h.begin());
  for (std::size_t r = 0; r < n3; ++r) {
    double acc = th[off_b3_ + r];
    const double* row = th + off_w3_ + r * n2;
    for (std::size_t c = 0; c < n2; ++c) acc += row[c] * a2[c];
    a3[r] = 1.0 / (1.0 + std::exp(-acc));
  }
  for (std::size_t r = 0; r < out; ++r) {
    double acc = th[off_b4_ + r];
    const double* row = th + off_w4_ + r * n3;
    for (std::size_t c = 0; c < n3; ++c) acc += row[c] * a3[c];
    latent[r] = std::clamp(acc, 0.0, 6.0);
  }
}

std::vector<double> Policy::forward(std::span<const double> features, HiddenState& hidden) const {
  std::vector<double> latent(sz(spec_.output_dim));
  forward(features, hidden, latent);
  return latent;
}

json spec_to_json(const NetworkSpec& s) {
  return json{{"input_dim", s.input_dim},
              {"h1", s.h1},
              {"h2", s.h2},
              {"h3", s.h3},
              {"output_dim", s.output_dim},
              {"h1_activation", to_string(s.h1_activation)},
              {"normalize_inputs", s.normalize_inputs}};
}

NetworkSpec spec_from_json(const json& doc) {
  try {
    NetworkSpec s;
    s.input_dim = doc.at("input_dim").get<int>();
    s.h1 = doc.value("h1", 10);
    s.h2 = doc.value("h2", 4);
    s.h3 = doc.value("h3", 2);
    s.output_dim = doc.at("output_dim").get<int>();
    s.h1_activation = activation_from_string(doc.value("h1_activation", std::string("identity")));
    s.normalize_inputs = doc.value("normalize_inputs", true);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("policy spec: ") + e.what());
  }
}

json policy_to_json(const Policy& policy, const json& metadata) {
  return json{{"schema_version", 1},
              {"spec", spec_to_json(policy.spec())},
              {"theta", policy.theta()},
              {"metadata", metadata}};
}

PolicyDocument policy_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("policy: expected an object");
  if (doc.value("schema_version", 0) != 1) throw ParseError("policy: unsupported schema_version");
  if (!doc.contains("spec") || !doc.contains("theta")) throw ParseError("policy: 'spec' and 'theta' are required");
  std::vector<double> theta;
  try {
    theta = doc.at("theta").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("policy theta: ") + e.what());
  }
  return PolicyDocument{Policy(spec_from_json(doc.at("spec")), std::move(theta)),
                        doc.value("metadata", json::object())};
}

void save_policy(const std::string& path, const Policy& policy, const json& metadata) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write policy file " + path);
  out << policy_to_json(policy, metadata).dump(2) << '\n';
}

PolicyDocument load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open policy file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return policy_from_json(doc);
}

void check_compatible(const NetworkSpec& spec, const ProblemInstance& instance) {
  if (spec.input_dim != instance.state_dim() || spec.output_dim != instance.num_units()) {
    throw ConfigError("policy expects " + std::to_string(spec.input_dim) + " inputs and " +
                      std::to_string(spec.output_dim) + " outputs; instance '" + instance.name() + "' has " +
                      std::to_string(instance.state_dim()) + " and " + std::to_string(instance.num_units()));
  }
}

}  // namespace psched
