#include "demote/optimizer.hpp"

#include <cmath>

#include "demote/errors.hpp"

namespace demote {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kPlainSgd ? "plain-sgd" : "adaptive-moment";
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "plain-sgd") return OptimizerKind::kPlainSgd;
  if (name == "adaptive-moment") return OptimizerKind::kAdaptiveMoment;
  throw ValidationError("optimizer: expected plain-sgd or adaptive-moment, got '" + name + "'");
}

namespace {

template <typename Params, typename F>
void visit_group(Params& p, F&& fn) {
  if constexpr (std::is_same_v<std::remove_const_t<Params>, EncoderParams>) {
    EncoderParams::visit(p, fn);
  } else {
    HeadParams::visit(p, "", fn);
  }
}

}  // namespace

double squared_norm(const EncoderParams& grad) {
  double s = 0.0;
  EncoderParams::visit(grad, [&](const std::string&, const auto& t) { s += t.squaredNorm(); });
  return s;
}

double squared_norm(const HeadParams& grad) {
  double s = 0.0;
  HeadParams::visit(grad, "", [&](const std::string&, const auto& t) { s += t.squaredNorm(); });
  return s;
}

Optimizer::Optimizer(const ModelParams& params, OptimizerSettings settings)
    : settings_(settings), adversaries_(params.adversaries.size()) {
  if (!(settings_.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (settings_.grad_clip_norm && !(*settings_.grad_clip_norm > 0.0)) {
    throw ValidationError("grad_clip_norm must be positive or none");
  }
}

template <typename Params>
void Optimizer::update_group(Params& params, const Params& grad, Slot& slot, double clip_scale) {
  ++slot.steps;
  const bool adam = settings_.kind == OptimizerKind::kAdaptiveMoment;
  const double lr = settings_.learning_rate;
  const double bc1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(slot.steps));
  const double bc2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(slot.steps));

  // Matrices and vectors are both viewed as flat arrays.
  std::vector<std::pair<double*, Eigen::Index>> param_data;
  std::vector<std::pair<const double*, Eigen::Index>> grad_data;
  visit_group(params, [&](const std::string&, auto& t) { param_data.emplace_back(t.data(), t.size()); });
  visit_group(grad, [&](const std::string&, const auto& t) { grad_data.emplace_back(t.data(), t.size()); });
  if (param_data.size() != grad_data.size()) throw ValidationError("optimizer: gradient layout mismatch");

  if (adam && slot.m.empty()) {
    for (const auto& [ptr, size] : param_data) {
      slot.m.push_back(Matrix::Zero(size, 1));
      slot.v.push_back(Matrix::Zero(size, 1));
    }
  }
  for (std::size_t index = 0; index < param_data.size(); ++index) {
    Eigen::Map<Eigen::ArrayXd> p(param_data[index].first, param_data[index].second);
    Eigen::Map<const Eigen::ArrayXd> g(grad_data[index].first, grad_data[index].second);
    if (g.size() != p.size()) throw ValidationError("optimizer: gradient shape mismatch");
    if (!adam) {
      p -= (lr * clip_scale) * g;
      continue;
    }
    auto m = slot.m[index].array();
    auto v = slot.v[index].array();
    const Eigen::ArrayXd gs = g * clip_scale;
    m = settings_.beta1 * m + (1.0 - settings_.beta1) * gs;
    v = settings_.beta2 * v + (1.0 - settings_.beta2) * gs.square();
    p -= lr * (m / bc1) / ((v / bc2).sqrt() + settings_.epsilon);
  }
}

double Optimizer::step(ModelParams& params, const ModelGrads& grads) {
  double sq = 0.0;
  if (grads.encoder) sq += squared_norm(*grads.encoder);
  if (grads.classifier) sq += squared_norm(*grads.classifier);
  for (const auto& g : grads.adversaries) {
    if (g) sq += squared_norm(*g);
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  double scale = 1.0;
  if (settings_.grad_clip_norm && norm > *settings_.grad_clip_norm) {
    scale = *settings_.grad_clip_norm / norm;
  }
  if (grads.encoder) update_group(params.encoder, *grads.encoder, encoder_, scale);
  if (grads.classifier) update_group(params.classifier, *grads.classifier, classifier_, scale);
  for (std::size_t k = 0; k < grads.adversaries.size(); ++k) {
    if (grads.adversaries[k]) {
      update_group(params.adversaries.at(k), *grads.adversaries[k], adversaries_.at(k), scale);
    }
  }
  return norm;
}

double Optimizer::step_adversary(ModelParams& params, int index, const HeadParams& grad) {
  ModelGrads g;
  g.adversaries.resize(params.adversaries.size());
  g.adversaries.at(static_cast<std::size_t>(index)) = grad;
  return step(params, g);
}

}  // namespace demote
