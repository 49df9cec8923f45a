#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ktlab/categorical.hpp"
#include "ktlab/seq/vocab.hpp"

namespace ktlab::seq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ModelDims {
  int source_vocab = 0;
  int target_vocab = 0;
  int hidden = 0;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Parameters of the recurrent encoder-decoder.
///
///   encoder  s_i = tanh(enc_in e(x_i) + enc_rec s_{i-1} + enc_bias),  s_{-1} = 0,  c = s_last
///   decoder  h_t = tanh(dec_in e(y_{t-1}) + dec_rec h_{t-1} + dec_ctx c + dec_bias),
///            h_{-1} = c,  y_{-1} = BOS
///   output   p(y_t | h_t) = softmax(out_proj h_t + out_bias)
///
/// The same struct doubles as a gradient accumulator.
struct ModelParams {
  Mat src_embed;  // Vs x d
  Mat enc_in;     // d x d
  Mat enc_rec;    // d x d
  Vec enc_bias;   // d
  Mat tgt_embed;  // Vt x d
  Mat dec_in;     // d x d
  Mat dec_rec;    // d x d
  Mat dec_ctx;    // d x d
  Vec dec_bias;   // d
  Mat out_proj;   // Vt x d
  Vec out_bias;   // Vt

  static ModelParams zeros(const ModelDims& dims);
  /// Entries uniform in [-scale, scale]; scale <= 0 selects 1/sqrt(d).
  static ModelParams random(const ModelDims& dims, std::uint64_t seed, double scale = 0.0);

  ModelDims dims() const;
  /// Throws if any block has inconsistent shape or a non-finite entry.
  void validate() const;
  std::size_t num_parameters() const;

  /// Visit every block, in a fixed order, as a flat column-major span.
  void for_each_block(const std::function<void(const std::string&, std::span<double>)>& f);
  void for_each_block(
      const std::function<void(const std::string&, std::span<const double>)>& f) const;

  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);
  void set_zero();
  /// FNV-1a over the raw bytes of every block.
  std::uint64_t checksum() const;
};

/// Encoder states for one source sentence; context() is the last state.
struct Encoding {
  std::vector<Vec> states;
  const Vec& context() const { return states.back(); }
};

Encoding encode(const ModelParams& params, std::span<const TokenId> source);

/// One decoder step h_t = f(h_{t-1}, y_{t-1}; x).
Vec transition(const ModelParams& params, const Vec& prev_hidden, TokenId prev_token,
               const Vec& context);

/// Backprop through one decoder step given dL/dh_t. Accumulates parameter gradients
/// into `grads` and adds to d_prev_hidden / d_context.
void transition_backward(const ModelParams& params, const Vec& prev_hidden, TokenId prev_token,
                         const Vec& context, const Vec& hidden, const Vec& d_hidden,
                         ModelParams& grads, Vec& d_prev_hidden, Vec& d_context);

Vec output_logits(const ModelParams& params, const Vec& hidden);
Categorical token_dist(const ModelParams& params, const Vec& hidden);

/// Teacher-forced pass over a target: hidden state and logits at every position.
struct ForwardPass {
  Encoding encoding;
  std::vector<Vec> hidden;  // h_0 .. h_{T-1}
  std::vector<Vec> logits;  // one per target position
};

ForwardPass teacher_forced(const ModelParams& params, std::span<const TokenId> source,
                           std::span<const TokenId> target);

/// Per-position learner distributions under teacher forcing.
std::vector<Categorical> position_dists(const ModelParams& params, std::span<const TokenId> source,
                                        std::span<const TokenId> target);

/// Backpropagate dL/dlogits at every position through the whole model.
void backward(const ModelParams& params, const ForwardPass& pass, std::span<const TokenId> source,
              std::span<const TokenId> target, std::span<const Vec> d_logits, ModelParams& grads);

/// sum_t log p(y_t | y_<t, x) under teacher forcing.
double sequence_logprob(const ModelParams& params, const SentencePair& pair);

}  // namespace ktlab::seq
