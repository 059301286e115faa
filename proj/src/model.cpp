#include "demote/model.hpp"

#include <algorithm>
#include <cmath>

#include "demote/errors.hpp"
#include "demote/hash.hpp"
#include "demote/rng.hpp"

namespace demote {

void ModelDims::validate() const {
  if (vocab_size < 2) throw ValidationError("vocab_size must be >= 2");
  if (d_emb < 1 || d_h < 1 || d_mlp < 1) throw ValidationError("model dimensions must be positive");
  if (num_target_classes < 2 || num_protected_classes < 2) {
    throw ValidationError("class counts must be >= 2");
  }
  if (n_adversaries < 1) throw ValidationError("n_adversaries must be >= 1");
}

namespace {

template <typename T>
void hash_tensor(Sha256& h, const std::string& name, const T& tensor) {
  h.update(name);
  const std::int64_t shape[2] = {static_cast<std::int64_t>(tensor.rows()),
                                 static_cast<std::int64_t>(tensor.cols())};
  h.update(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(shape),
                                          sizeof(shape)));
  h.update(std::span<const double>(tensor.data(), static_cast<std::size_t>(tensor.size())));
}

}  // namespace

std::string encoder_hash(const EncoderParams& params) {
  Sha256 h;
  EncoderParams::visit(params, [&](const std::string& name, const auto& t) { hash_tensor(h, name, t); });
  return h.hex_digest();
}

std::string head_hash(const HeadParams& params) {
  Sha256 h;
  HeadParams::visit(params, "", [&](const std::string& name, const auto& t) { hash_tensor(h, name, t); });
  return h.hex_digest();
}

std::string params_hash(const ModelParams& params) {
  Sha256 h;
  params.for_each_tensor([&](const std::string& name, const auto& t) { hash_tensor(h, name, t); });
  return h.hex_digest();
}

namespace {

void glorot(Rng& rng, Matrix& m, int rows, int cols, int fan_in, int fan_out) {
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  m.resize(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-r, r);
  }
}

void glorot(Rng& rng, Vector& v, int size, int fan_in, int fan_out) {
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  v.resize(size);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-r, r);
}

LstmParams init_lstm(Rng& rng, int d_in, int d_h) {
  LstmParams p;
  glorot(rng, p.w_input, 4 * d_h, d_in, d_in, 4 * d_h);
  glorot(rng, p.w_recurrent, 4 * d_h, d_h, d_h, 4 * d_h);
  p.bias = Vector::Zero(4 * d_h);
  p.bias.segment(d_h, d_h).setOnes();
  return p;
}

HeadParams init_head(Rng& rng, int d_in, int d_mlp, int n_classes) {
  HeadParams p;
  glorot(rng, p.w_hidden, d_mlp, d_in, d_in, d_mlp);
  p.b_hidden = Vector::Zero(d_mlp);
  glorot(rng, p.w_out, n_classes, d_mlp, d_mlp, n_classes);
  p.b_out = Vector::Zero(n_classes);
  return p;
}

}  // namespace

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  Rng rng(seed);
  ModelParams p;
  p.dims = dims;
  const int rep = dims.rep_dim();
  glorot(rng, p.encoder.embedding, dims.d_emb, dims.vocab_size, dims.vocab_size, dims.d_emb);
  p.encoder.forward = init_lstm(rng, dims.d_emb, dims.d_h);
  p.encoder.backward = init_lstm(rng, dims.d_emb, dims.d_h);
  glorot(rng, p.encoder.attn_proj, rep, rep, rep, rep);
  p.encoder.attn_bias = Vector::Zero(rep);
  glorot(rng, p.encoder.attn_vector, rep, rep, 1);
  p.classifier = init_head(rng, rep, dims.d_mlp, dims.num_target_classes);
  for (int k = 0; k < dims.n_adversaries; ++k) {
    p.adversaries.push_back(init_head(rng, rep, dims.d_mlp, dims.num_protected_classes));
  }
  return p;
}

bool all_finite(const ModelParams& params) {
  bool ok = true;
  params.for_each_tensor([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

Batch make_batch(const EncodedDataset& data, std::span<const std::size_t> indices) {
  Batch b;
  for (std::size_t i : indices) b.max_len = std::max(b.max_len, data.lengths.at(i));
  b.ids.reserve(indices.size() * static_cast<std::size_t>(b.max_len));
  for (std::size_t i : indices) {
    auto row = data.row(i);
    b.ids.insert(b.ids.end(), row.begin(), row.begin() + b.max_len);
    b.lengths.push_back(data.lengths[i]);
    b.targets.push_back(data.targets[i]);
    b.protected_labels.push_back(data.protected_labels[i]);
  }
  return b;
}

Batch make_batch(const EncodedDataset& data) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch(data, all);
}

namespace {

using Eigen::Index;

Matrix sigmoid(const Matrix& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

void lstm_forward(const LstmParams& p, const Matrix& embedding, LstmTrace& tr, int steps, int batch) {
  const Index d_h = p.w_recurrent.cols();
  const Index cols = static_cast<Index>(steps) * batch;
  tr.inputs = Matrix::Zero(embedding.rows(), cols);
  for (Index c = 0; c < cols; ++c) {
    if (tr.ids[c] >= 0) tr.inputs.col(c) = embedding.col(tr.ids[c]);
  }
  tr.gates.resize(4 * d_h, cols);
  tr.gates.noalias() = p.w_input * tr.inputs;
  tr.gates.colwise() += p.bias;
  tr.cells.resize(d_h, cols);
  tr.cell_tanh.resize(d_h, cols);
  tr.hidden.resize(d_h, cols);

  Matrix h_prev = Matrix::Zero(d_h, batch);
  Matrix c_prev = Matrix::Zero(d_h, batch);
  for (int t = 0; t < steps; ++t) {
    auto g = tr.gates.middleCols(static_cast<Index>(t) * batch, batch);
    g.noalias() += p.w_recurrent * h_prev;
    g.topRows(2 * d_h) = sigmoid(g.topRows(2 * d_h));
    g.middleRows(2 * d_h, d_h) = g.middleRows(2 * d_h, d_h).array().tanh().matrix();
    g.bottomRows(d_h) = sigmoid(g.bottomRows(d_h));
    auto c = tr.cells.middleCols(static_cast<Index>(t) * batch, batch);
    c = g.middleRows(d_h, d_h).cwiseProduct(c_prev) +
        g.topRows(d_h).cwiseProduct(g.middleRows(2 * d_h, d_h));
    auto ct = tr.cell_tanh.middleCols(static_cast<Index>(t) * batch, batch);
    ct = c.array().tanh().matrix();
    auto h = tr.hidden.middleCols(static_cast<Index>(t) * batch, batch);
    h = g.bottomRows(d_h).cwiseProduct(ct);
    h_prev = h;
    c_prev = c;
  }
}

// Accumulates parameter gradients and returns d(inputs).
void lstm_backward(const LstmParams& p, const LstmTrace& tr, const Matrix& d_hidden, int steps,
                   int batch, LstmParams& grad, Matrix& d_embedding) {
  const Index d_h = p.w_recurrent.cols();
  const Index cols = static_cast<Index>(steps) * batch;
  Matrix d_gates(4 * d_h, cols);
  Matrix dh_next = Matrix::Zero(d_h, batch);
  Matrix dc_next = Matrix::Zero(d_h, batch);
  Matrix dh(d_h, batch);
  Matrix dc(d_h, batch);
  for (int t = steps - 1; t >= 0; --t) {
    const Index off = static_cast<Index>(t) * batch;
    auto g = tr.gates.middleCols(off, batch);
    auto i_gate = g.topRows(d_h).array();
    auto f_gate = g.middleRows(d_h, d_h).array();
    auto c_gate = g.middleRows(2 * d_h, d_h).array();
    auto o_gate = g.bottomRows(d_h).array();
    auto ct = tr.cell_tanh.middleCols(off, batch).array();

    dh = d_hidden.middleCols(off, batch) + dh_next;
    dc = dc_next.array() + dh.array() * o_gate * (1.0 - ct.square());
    auto dg = d_gates.middleCols(off, batch);
    dg.topRows(d_h) = (dc.array() * c_gate * i_gate * (1.0 - i_gate)).matrix();
    if (t > 0) {
      auto c_prev = tr.cells.middleCols(off - batch, batch).array();
      dg.middleRows(d_h, d_h) = (dc.array() * c_prev * f_gate * (1.0 - f_gate)).matrix();
    } else {
      dg.middleRows(d_h, d_h).setZero();
    }
    dg.middleRows(2 * d_h, d_h) = (dc.array() * i_gate * (1.0 - c_gate.square())).matrix();
    dg.bottomRows(d_h) = (dh.array() * ct * o_gate * (1.0 - o_gate)).matrix();
    dc_next = (dc.array() * f_gate).matrix();
    dh_next.noalias() = p.w_recurrent.transpose() * dg;
  }
  grad.w_input.noalias() += d_gates * tr.inputs.transpose();
  if (steps > 1) {
    const Index tail = cols - batch;
    grad.w_recurrent.noalias() +=
        d_gates.rightCols(tail) * tr.hidden.leftCols(tail).transpose();
  }
  grad.bias += d_gates.rowwise().sum();
  Matrix d_inputs = p.w_input.transpose() * d_gates;
  for (Index c = 0; c < cols; ++c) {
    if (tr.ids[c] >= 0) d_embedding.col(tr.ids[c]) += d_inputs.col(c);
  }
}

EncoderParams zeros_like(const EncoderParams& p) {
  EncoderParams z = p;
  EncoderParams::visit(z, [](const std::string&, auto& t) { t.setZero(); });
  return z;
}

HeadParams zeros_like(const HeadParams& p) {
  HeadParams z = p;
  HeadParams::visit(z, "", [](const std::string&, auto& t) { t.setZero(); });
  return z;
}

void encoder_backward(const EncoderParams& p, const EncoderTrace& tr, const Matrix& d_rep,
                      EncoderParams& grad) {
  const int B = tr.batch;
  const int T = tr.steps;
  const Index d_h = p.forward.w_recurrent.cols();
  const Index cols = static_cast<Index>(T) * B;

  Matrix d_states = Matrix::Zero(2 * d_h, cols);
  Matrix d_scores = Matrix::Zero(1, cols);
  for (int b = 0; b < B; ++b) {
    const int len = tr.lengths[b];
    Vector d_attn(len);
    double weighted = 0.0;
    for (int t = 0; t < len; ++t) {
      const Index c = static_cast<Index>(t) * B + b;
      d_attn(t) = d_rep.col(b).dot(tr.states.col(c));
      weighted += tr.attention(t, b) * d_attn(t);
      d_states.col(c) += tr.attention(t, b) * d_rep.col(b);
    }
    for (int t = 0; t < len; ++t) {
      const Index c = static_cast<Index>(t) * B + b;
      d_scores(0, c) = tr.attention(t, b) * (d_attn(t) - weighted);
    }
  }
  grad.attn_vector.noalias() += tr.attn_hidden * d_scores.transpose();
  Matrix d_pre = (p.attn_vector * d_scores).cwiseProduct(
      (1.0 - tr.attn_hidden.array().square()).matrix());
  grad.attn_proj.noalias() += d_pre * tr.states.transpose();
  grad.attn_bias += d_pre.rowwise().sum();
  d_states.noalias() += p.attn_proj.transpose() * d_pre;

  Matrix d_forward = Matrix::Zero(d_h, cols);
  Matrix d_backward = Matrix::Zero(d_h, cols);
  for (int b = 0; b < B; ++b) {
    const int len = tr.lengths[b];
    for (int t = 0; t < len; ++t) {
      const Index c = static_cast<Index>(t) * B + b;
      const Index rc = static_cast<Index>(len - 1 - t) * B + b;
      d_forward.col(c) = d_states.col(c).head(d_h);
      d_backward.col(rc) = d_states.col(c).tail(d_h);
    }
  }
  lstm_backward(p.forward, tr.forward, d_forward, T, B, grad.forward, grad.embedding);
  lstm_backward(p.backward, tr.backward, d_backward, T, B, grad.backward, grad.embedding);
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - m).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }
bool clamp_active(double p) { return p < kProbClamp || p > 1.0 - kProbClamp; }

// d(mean CE)/d(logits) scaled by `scale`.
Matrix cross_entropy_logit_grad(const Matrix& probs, std::span<const int> gold, double scale) {
  Matrix d = probs;
  for (Index j = 0; j < probs.cols(); ++j) {
    const int y = gold[static_cast<std::size_t>(j)];
    if (clamp_active(probs(y, j))) {
      d.col(j).setZero();
    } else {
      d(y, j) -= 1.0;
      d.col(j) *= scale;
    }
  }
  return d;
}

Matrix uniform_logit_grad(const Matrix& probs, double scale) {
  const double k = static_cast<double>(probs.rows());
  Matrix d(probs.rows(), probs.cols());
  for (Index j = 0; j < probs.cols(); ++j) {
    Vector g(probs.rows());
    for (Index c = 0; c < probs.rows(); ++c) {
      const double p = probs(c, j);
      g(c) = clamp_active(p) ? 0.0 : -1.0 / (k * p);
    }
    const double dot = probs.col(j).dot(g);
    d.col(j) = (probs.col(j).array() * (g.array() - dot)).matrix() * scale;
  }
  return d;
}

double mean_cross_entropy(const Matrix& probs, std::span<const int> gold) {
  double sum = 0.0;
  for (Index j = 0; j < probs.cols(); ++j) {
    sum += cross_entropy(std::span<const double>(probs.col(j).data(), probs.rows()),
                         gold[static_cast<std::size_t>(j)]);
  }
  return sum / static_cast<double>(probs.cols());
}

double mean_uniform_loss(const Matrix& probs) {
  double sum = 0.0;
  for (Index j = 0; j < probs.cols(); ++j) {
    sum += uniform_target_loss(std::span<const double>(probs.col(j).data(), probs.rows()));
  }
  return sum / static_cast<double>(probs.cols());
}

// Backprop through one head; accumulates into grad when given, returns d(reps).
Matrix head_backward(const HeadParams& p, const Matrix& reps, const HeadTrace& tr,
                     const Matrix& d_logits, HeadParams* grad) {
  Matrix d_hidden = p.w_out.transpose() * d_logits;
  d_hidden.array() *= 1.0 - tr.hidden.array().square();
  if (grad != nullptr) {
    grad->w_out.noalias() += d_logits * tr.hidden.transpose();
    grad->b_out += d_logits.rowwise().sum();
    grad->w_hidden.noalias() += d_hidden * reps.transpose();
    grad->b_hidden += d_hidden.rowwise().sum();
  }
  return p.w_hidden.transpose() * d_hidden;
}

}  // namespace

EncoderTrace encoder_forward(const EncoderParams& p, const Batch& batch) {
  const int B = batch.size();
  const int T = batch.max_len;
  if (B < 1 || T < 1) throw ValidationError("encoder_forward: empty batch");
  const Index vocab = p.embedding.cols();
  const Index d_h = p.forward.w_recurrent.cols();
  const Index cols = static_cast<Index>(T) * B;

  EncoderTrace tr;
  tr.batch = B;
  tr.steps = T;
  tr.lengths = batch.lengths;
  tr.forward.ids.assign(static_cast<std::size_t>(cols), -1);
  tr.backward.ids.assign(static_cast<std::size_t>(cols), -1);
  for (int b = 0; b < B; ++b) {
    const int len = batch.lengths[b];
    if (len < 1 || len > T) throw ValidationError("encoder_forward: bad sequence length");
    for (int t = 0; t < len; ++t) {
      const int id = batch.ids[static_cast<std::size_t>(b) * T + t];
      if (id < 0 || id >= vocab) {
        throw ValidationError("encoder_forward: token id " + std::to_string(id) + " out of range");
      }
      tr.forward.ids[static_cast<std::size_t>(t) * B + b] = id;
      tr.backward.ids[static_cast<std::size_t>(len - 1 - t) * B + b] = id;
    }
  }
  lstm_forward(p.forward, p.embedding, tr.forward, T, B);
  lstm_forward(p.backward, p.embedding, tr.backward, T, B);

  tr.states = Matrix::Zero(2 * d_h, cols);
  for (int b = 0; b < B; ++b) {
    const int len = batch.lengths[b];
    for (int t = 0; t < len; ++t) {
      const Index c = static_cast<Index>(t) * B + b;
      const Index rc = static_cast<Index>(len - 1 - t) * B + b;
      tr.states.col(c).head(d_h) = tr.forward.hidden.col(c);
      tr.states.col(c).tail(d_h) = tr.backward.hidden.col(rc);
    }
  }
  tr.attn_hidden.resize(2 * d_h, cols);
  tr.attn_hidden.noalias() = p.attn_proj * tr.states;
  tr.attn_hidden.colwise() += p.attn_bias;
  tr.attn_hidden = tr.attn_hidden.array().tanh().matrix();
  const Matrix scores = p.attn_vector.transpose() * tr.attn_hidden;

  tr.attention = Matrix::Zero(T, B);
  tr.representation = Matrix::Zero(2 * d_h, B);
  for (int b = 0; b < B; ++b) {
    const int len = batch.lengths[b];
    double m = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < len; ++t) m = std::max(m, scores(0, static_cast<Index>(t) * B + b));
    double z = 0.0;
    for (int t = 0; t < len; ++t) {
      const double e = std::exp(scores(0, static_cast<Index>(t) * B + b) - m);
      tr.attention(t, b) = e;
      z += e;
    }
    for (int t = 0; t < len; ++t) {
      tr.attention(t, b) /= z;
      tr.representation.col(b) += tr.attention(t, b) * tr.states.col(static_cast<Index>(t) * B + b);
    }
  }
  return tr;
}

EncodedText encode_text(const EncoderParams& params, std::span<const int> ids, int length) {
  if (length < 1 || static_cast<std::size_t>(length) > ids.size()) {
    throw ValidationError("encode_text: length must be in [1, ids.size()]");
  }
  Batch b;
  b.max_len = length;
  b.ids.assign(ids.begin(), ids.begin() + length);
  b.lengths = {length};
  b.targets = {0};
  b.protected_labels = {0};
  EncoderTrace tr = encoder_forward(params, b);
  EncodedText out;
  out.representation = tr.representation.col(0);
  out.attention = tr.attention.col(0);
  return out;
}

HeadTrace head_forward(const HeadParams& p, const Matrix& reps) {
  if (reps.rows() != p.w_hidden.cols()) {
    throw ValidationError("head_forward: representation has " + std::to_string(reps.rows()) +
                          " rows, head expects " + std::to_string(p.w_hidden.cols()));
  }
  HeadTrace tr;
  tr.hidden.resize(p.w_hidden.rows(), reps.cols());
  tr.hidden.noalias() = p.w_hidden * reps;
  tr.hidden.colwise() += p.b_hidden;
  tr.hidden = tr.hidden.array().tanh().matrix();
  Matrix logits = p.w_out * tr.hidden;
  logits.colwise() += p.b_out;
  tr.probs = softmax_columns(logits);
  return tr;
}

Vector head_forward(const HeadParams& p, const Vector& rep) {
  return head_forward(p, Matrix(rep)).probs.col(0);
}

double cross_entropy(std::span<const double> pred, int gold) {
  return -std::log(clamp_prob(pred[static_cast<std::size_t>(gold)]));
}

double uniform_target_loss(std::span<const double> pred) {
  double sum = 0.0;
  for (double p : pred) sum += std::log(clamp_prob(p));
  return -sum / static_cast<double>(pred.size());
}

void LossSpec::validate(const ModelDims& dims) const {
  if (objective == Objective::kAdversary &&
      (adversary_index < 0 || adversary_index >= dims.n_adversaries)) {
    throw ValidationError("loss spec: adversary index " + std::to_string(adversary_index) +
                          " out of range");
  }
  if (objective == Objective::kDemotion && !(alpha > 0.0 && alpha <= 1.0)) {
    throw ValidationError("loss spec: alpha must lie in (0, 1]");
  }
}

namespace {

GradientResult run(const ModelParams& params, const Batch& batch, const LossSpec& spec,
                   bool want_grads) {
  spec.validate(params.dims);
  GradientResult out;
  const EncoderTrace enc = encoder_forward(params.encoder, batch);
  const Matrix& reps = enc.representation;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  out.grads.adversaries.resize(params.adversaries.size());

  switch (spec.objective) {
    case Objective::kAdversary: {
      const HeadParams& adv = params.adversaries[static_cast<std::size_t>(spec.adversary_index)];
      const HeadTrace head = head_forward(adv, reps);
      out.loss.adversary_ce = mean_cross_entropy(head.probs, batch.protected_labels);
      out.loss.total = *out.loss.adversary_ce;
      if (want_grads) {
        HeadParams g = zeros_like(adv);
        head_backward(adv, reps, head,
                      cross_entropy_logit_grad(head.probs, batch.protected_labels, inv_b), &g);
        out.grads.adversaries[static_cast<std::size_t>(spec.adversary_index)] = std::move(g);
      }
      return out;
    }
    case Objective::kPretrain:
    case Objective::kDemotion: {
      const bool demote = spec.objective == Objective::kDemotion;
      const double w_target = demote ? spec.alpha : 1.0;
      const double w_uniform = demote ? 1.0 - spec.alpha : 0.0;

      const HeadTrace cls = head_forward(params.classifier, reps);
      out.loss.target_ce = mean_cross_entropy(cls.probs, batch.targets);
      out.loss.total = w_target * *out.loss.target_ce;

      std::vector<HeadTrace> adv_traces;
      if (demote) {
        double term = 0.0;
        for (const HeadParams& adv : params.adversaries) {
          adv_traces.push_back(head_forward(adv, reps));
          term += mean_uniform_loss(adv_traces.back().probs);
        }
        out.loss.demotion_term = term / static_cast<double>(params.adversaries.size());
        out.loss.total += w_uniform * *out.loss.demotion_term;
      }
      if (!want_grads) return out;

      HeadParams g_cls = zeros_like(params.classifier);
      Matrix d_rep = head_backward(params.classifier, reps, cls,
                                   cross_entropy_logit_grad(cls.probs, batch.targets, w_target * inv_b),
                                   &g_cls);
      // A zero-weight term contributes nothing; it is skipped so that
      // alpha = 1 reproduces the pre-training update exactly.
      if (demote && w_uniform != 0.0) {
        const double scale = w_uniform * inv_b / static_cast<double>(params.adversaries.size());
        for (std::size_t k = 0; k < params.adversaries.size(); ++k) {
          d_rep += head_backward(params.adversaries[k], reps, adv_traces[k],
                                 uniform_logit_grad(adv_traces[k].probs, scale), nullptr);
        }
      }
      EncoderParams g_enc = zeros_like(params.encoder);
      encoder_backward(params.encoder, enc, d_rep, g_enc);
      out.grads.encoder = std::move(g_enc);
      out.grads.classifier = std::move(g_cls);
      return out;
    }
  }
  throw ValidationError("loss spec: unknown objective");
}

}  // namespace

LossBreakdown evaluate_loss(const ModelParams& params, const Batch& batch, const LossSpec& spec) {
  return run(params, batch, spec, false).loss;
}

GradientResult backward(const ModelParams& params, const Batch& batch, const LossSpec& spec) {
  return run(params, batch, spec, true);
}

HeadGradient head_cross_entropy_gradient(const HeadParams& params, const Matrix& reps,
                                         std::span<const int> labels) {
  HeadGradient out;
  const HeadTrace tr = head_forward(params, reps);
  out.loss = mean_cross_entropy(tr.probs, labels);
  out.grad = zeros_like(params);
  head_backward(params, reps, tr,
                cross_entropy_logit_grad(tr.probs, labels, 1.0 / static_cast<double>(reps.cols())),
                &out.grad);
  return out;
}

Matrix encode_dataset_reps(const EncoderParams& params, const EncodedDataset& data, int chunk) {
  Matrix reps(params.attn_proj.rows(), static_cast<Index>(data.size()));
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(chunk));
    idx.clear();
    for (std::size_t i = start; i < end; ++i) idx.push_back(i);
    const EncoderTrace tr = encoder_forward(params, make_batch(data, idx));
    reps.middleCols(static_cast<Index>(start), static_cast<Index>(end - start)) = tr.representation;
  }
  return reps;
}

std::vector<int> argmax_columns(const Matrix& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.cols()));
  for (Index j = 0; j < probs.cols(); ++j) {
    Index best = 0;
    probs.col(j).maxCoeff(&best);
    out[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace demote
