#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "psched/env.hpp"
#include "psched/instance.hpp"

namespace psched {

enum class Activation { Identity, Tanh, Sigmoid, Relu6 };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Layer sizes of the scheduling network: input -> h1 (feedforward) ->
/// h2 (Elman, tanh) -> h3 (sigmoid) -> output (ReLU6), one output per unit.
struct NetworkSpec {
  int input_dim = 0;
  int h1 = 10;
  int h2 = 4;
  int h3 = 2;
  int output_dim = 0;
  Activation h1_activation = Activation::Identity;
  bool normalize_inputs = true;

  void validate() const;
  bool operator==(const NetworkSpec&) const = default;
};

NetworkSpec network_for(const ProblemInstance& instance);

/// Flat layout, layer-major: W1 (h1 x in, row-major), b1, W2 (h2 x h1), U2
/// (h2 x h2, recurrent), b2, W3 (h3 x h2), b3, W4 (out x h3), b4.
std::size_t param_count(const NetworkSpec& spec);

struct LayerWeights {
  std::vector<double> w1, b1, w2, u2, b2, w3, b3, w4, b4;
};

LayerWeights decode(const NetworkSpec& spec, std::span<const double> theta);
std::vector<double> encode(const NetworkSpec& spec, const LayerWeights& weights);

/// Features in state-vector order. With normalization: inventory / order
/// size, last control / (N+1), countdowns, due countdowns and t / horizon.
void normalize_state(const PlantState& state, const ProblemInstance& instance, std::span<double> out,
                     bool normalize = true);
std::vector<double> normalize_state(const PlantState& state, const ProblemInstance& instance, bool normalize = true);

/// Elman context carried across the steps of one episode.
struct HiddenState {
  std::vector<double> h;

  void reset() { std::fill(h.begin(), h.end(), 0.0); }
};

/// Immutable network parameters. Safe to share across threads; every
/// per-episode buffer lives in HiddenState and ForwardScratch.
class Policy {
 public:
  Policy(NetworkSpec spec, std::vector<double> theta);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<double>& theta() const { return theta_; }

  HiddenState initial_hidden() const { return HiddenState{std::vector<double>(static_cast<std::size_t>(spec_.h2), 0.0)}; }

  /// Latent outputs in [0, 6], one per unit. Updates `hidden` in place.
  void forward(std::span<const double> features, HiddenState& hidden, std::span<double> latent) const;
  std::vector<double> forward(std::span<const double> features, HiddenState& hidden) const;

 private:
  NetworkSpec spec_;
  std::vector<double> theta_;
  std::size_t off_b1_, off_w2_, off_u2_, off_b2_, off_w3_, off_b3_, off_w4_, off_b4_;
};

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& doc);

/// {"schema_version": 1, "spec": {...}, "theta": [...], "metadata": {...}}.
/// Doubles are written in shortest round-trip form, so reading back is exact.
nlohmann::json policy_to_json(const Policy& policy, const nlohmann::json& metadata = nlohmann::json::object());

struct PolicyDocument {
  Policy policy;
  nlohmann::json metadata;
};

PolicyDocument policy_from_json(const nlohmann::json& doc);
void save_policy(const std::string& path, const Policy& policy, const nlohmann::json& metadata = nlohmann::json::object());
PolicyDocument load_policy(const std::string& path);

/// ConfigError unless the policy's input and output sizes fit the instance.
void check_compatible(const NetworkSpec& spec, const ProblemInstance& instance);

}  // namespace psched
