#pragma once

#include <optional>
#include <string>
#include <vector>

#include "demote/model.hpp"

namespace demote {

enum class OptimizerKind { kPlainSgd, kAdaptiveMoment };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::kAdaptiveMoment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<double> grad_clip_norm = 5.0;
};

// Per-group optimizer state. The encoder, classifier, and each adversary keep
// their own moment estimates and step counters; a step only touches the
// groups present in the gradient.
class Optimizer {
 public:
  Optimizer(const ModelParams& params, OptimizerSettings settings);

  // Returns the pre-clip global norm over the gradients supplied.
  double step(ModelParams& params, const ModelGrads& grads);
  // Updates one adversary from a head gradient (frozen-encoder path).
  double step_adversary(ModelParams& params, int index, const HeadParams& grad);

  const OptimizerSettings& settings() const { return settings_; }

 private:
  struct Slot {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    long steps = 0;
  };
  template <typename Params>
  void update_group(Params& params, const Params& grad, Slot& slot, double clip_scale);

  OptimizerSettings settings_;
  Slot encoder_;
  Slot classifier_;
  std::vector<Slot> adversaries_;
};

double squared_norm(const EncoderParams& grad);
double squared_norm(const HeadParams& grad);

}  // namespace demote
