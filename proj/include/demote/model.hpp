#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demote/data.hpp"

namespace demote {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ModelDims {
  int vocab_size = 0;
  int d_emb = 64;
  int d_h = 64;
  int d_mlp = 64;
  int num_target_classes = 2;
  int num_protected_classes = 2;
  int n_adversaries = 1;

  int rep_dim() const { return 2 * d_h; }
  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

// Gate rows are stacked input, forget, cell, output.
struct LstmParams {
  Matrix w_input;      // 4*d_h x d_emb
  Matrix w_recurrent;  // 4*d_h x d_h
  Vector bias;         // 4*d_h

  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F&& fn) {
    fn(prefix + "w_input", self.w_input);
    fn(prefix + "w_recurrent", self.w_recurrent);
    fn(prefix + "bias", self.bias);
  }
};

// Bidirectional LSTM over token embeddings, pooled by additive attention:
// score_t = v . tanh(W s_t + b), weights = softmax over the true length.
struct EncoderParams {
  Matrix embedding;  // d_emb x |V|, one column per token id
  LstmParams forward;
  LstmParams backward;
  Matrix attn_proj;    // 2*d_h x 2*d_h
  Vector attn_bias;    // 2*d_h
  Vector attn_vector;  // 2*d_h

  template <typename Self, typename F>
  static void visit(Self& self, F&& fn) {
    fn(std::string("encoder.embedding"), self.embedding);
    LstmParams::visit(self.forward, "encoder.forward.", fn);
    LstmParams::visit(self.backward, "encoder.backward.", fn);
    fn(std::string("encoder.attn_proj"), self.attn_proj);
    fn(std::string("encoder.attn_bias"), self.attn_bias);
    fn(std::string("encoder.attn_vector"), self.attn_vector);
  }
};

// Two affine layers with tanh in between, softmax on top.
struct HeadParams {
  Matrix w_hidden;  // d_mlp x 2*d_h
  Vector b_hidden;  // d_mlp
  Matrix w_out;     // n_classes x d_mlp
  Vector b_out;     // n_classes

  int num_classes() const { return static_cast<int>(w_out.rows()); }

  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F&& fn) {
    fn(prefix + "w_hidden", self.w_hidden);
    fn(prefix + "b_hidden", self.b_hidden);
    fn(prefix + "w_out", self.w_out);
    fn(prefix + "b_out", self.b_out);
  }
};

struct ModelParams {
  ModelDims dims;
  EncoderParams encoder;
  HeadParams classifier;
  std::vector<HeadParams> adversaries;

  // Visits every tensor in a fixed order with a stable name. Vectors are
  // passed as Vector&, matrices as Matrix&.
  template <typename Self, typename F>
  static void visit(Self& self, F&& fn) {
    EncoderParams::visit(self.encoder, fn);
    HeadParams::visit(self.classifier, "classifier.", fn);
    for (std::size_t k = 0; k < self.adversaries.size(); ++k) {
      HeadParams::visit(self.adversaries[k], "adversary" + std::to_string(k) + ".", fn);
    }
  }
  template <typename F>
  void for_each_tensor(F&& fn) { visit(*this, fn); }
  template <typename F>
  void for_each_tensor(F&& fn) const { visit(*this, fn); }
};

std::string encoder_hash(const EncoderParams& params);
std::string head_hash(const HeadParams& params);
std::string params_hash(const ModelParams& params);

// Glorot-uniform weights, zero biases except forget gates (1).
ModelParams init_params(const ModelDims& dims, std::uint64_t seed);
bool all_finite(const ModelParams& params);

// A padded mini-batch. ids is row-major size() x max_len where max_len is
// the longest true length in the batch.
struct Batch {
  int max_len = 0;
  std::vector<int> ids;
  std::vector<int> lengths;
  std::vector<int> targets;
  std::vector<int> protected_labels;

  int size() const { return static_cast<int>(lengths.size()); }
};

Batch make_batch(const EncodedDataset& data, std::span<const std::size_t> indices);
Batch make_batch(const EncodedDataset& data);

struct LstmTrace {
  Matrix inputs;     // d_emb x (T*B), step-major
  Matrix gates;      // 4*d_h x (T*B), post-activation
  Matrix cells;      // d_h x (T*B)
  Matrix cell_tanh;  // d_h x (T*B)
  Matrix hidden;     // d_h x (T*B)
  std::vector<int> ids;  // token id per column, -1 past the true length
};

struct EncoderTrace {
  int batch = 0;
  int steps = 0;
  std::vector<int> lengths;
  LstmTrace forward;
  LstmTrace backward;  // runs over each sequence reversed within its length
  Matrix states;       // 2*d_h x (T*B), by original position
  Matrix attn_hidden;  // tanh(W s + b)
  Matrix attention;    // T x B, zero past the true length
  Matrix representation;  // 2*d_h x B
};

// Pooled representations (2*d_h x B) plus everything backprop needs.
EncoderTrace encoder_forward(const EncoderParams& params, const Batch& batch);

struct EncodedText {
  Vector representation;
  Vector attention;  // size == length
};

// Single-sequence convenience over encoder_forward. Positions >= length are
// padding and are ignored.
EncodedText encode_text(const EncoderParams& params, std::span<const int> ids, int length);

struct HeadTrace {
  Matrix hidden;  // tanh activations, d_mlp x B
  Matrix probs;   // n_classes x B
};

HeadTrace head_forward(const HeadParams& params, const Matrix& reps);
Vector head_forward(const HeadParams& params, const Vector& rep);

inline constexpr double kProbClamp = 1e-7;

// -log(pred[gold]) with pred clamped to [1e-7, 1 - 1e-7].
double cross_entropy(std::span<const double> pred, int gold);
// Cross-entropy against the uniform distribution: -(1/K) sum_c log pred[c],
// same clamping.
double uniform_target_loss(std::span<const double> pred);

enum class Objective {
  kPretrain,   // mean CE(C(H(x)), y) over H and C
  kAdversary,  // mean CE(D_k(H(x)), z) over D_k only
  kDemotion,   // alpha * CE(C(H(x)), y) + (1 - alpha) * uniform(D(H(x))) over H and C
};

struct LossSpec {
  Objective objective = Objective::kPretrain;
  int adversary_index = 0;
  double alpha = 1.0;

  void validate(const ModelDims& dims) const;
};

struct LossBreakdown {
  double total = 0.0;
  std::optional<double> target_ce;
  std::optional<double> demotion_term;  // mean over adversaries
  std::optional<double> adversary_ce;
};

// Gradients exist only for the groups an objective minimizes over.
struct ModelGrads {
  std::optional<EncoderParams> encoder;
  std::optional<HeadParams> classifier;
  std::vector<std::optional<HeadParams>> adversaries;
};

struct GradientResult {
  LossBreakdown loss;
  ModelGrads grads;
};

LossBreakdown evaluate_loss(const ModelParams& params, const Batch& batch, const LossSpec& spec);
GradientResult backward(const ModelParams& params, const Batch& batch, const LossSpec& spec);

// Head-only gradient of mean CE on precomputed representations; the path
// used when the encoder is frozen.
struct HeadGradient {
  double loss = 0.0;
  HeadParams grad;
};
HeadGradient head_cross_entropy_gradient(const HeadParams& params, const Matrix& reps,
                                         std::span<const int> labels);

// Representations for a whole dataset, computed in fixed-size chunks.
Matrix encode_dataset_reps(const EncoderParams& params, const EncodedDataset& data,
                           int chunk = 256);

std::vector<int> argmax_columns(const Matrix& probs);

}  // namespace demote
