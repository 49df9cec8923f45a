#include "ktlab/seq/model.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "ktlab/error.hpp"

namespace ktlab::seq {

namespace {

void check_dims(const ModelDims& d) {
  if (d.source_vocab < 4 || d.target_vocab < 4 || d.hidden < 1) {
    throw InvalidArgument("model dims: vocabularies need >= 4 tokens and hidden >= 1");
  }
}

template <class Params, class F>
void visit_blocks(Params& p, F&& f) {
  f("src_embed", p.src_embed);
  f("enc_in", p.enc_in);
  f("enc_rec", p.enc_rec);
  f("enc_bias", p.enc_bias);
  f("tgt_embed", p.tgt_embed);
  f("dec_in", p.dec_in);
  f("dec_rec", p.dec_rec);
  f("dec_ctx", p.dec_ctx);
  f("dec_bias", p.dec_bias);
  f("out_proj", p.out_proj);
  f("out_bias", p.out_bias);
}

void check_token(TokenId t, Eigen::Index vocab, const char* what) {
  if (t < 0 || t >= vocab) {
    throw InvalidArgument(std::string(what) + " token " + std::to_string(t) + " out of range");
  }
}

}  // namespace

ModelParams ModelParams::zeros(const ModelDims& dims) {
  check_dims(dims);
  const int d = dims.hidden;
  ModelParams p;
  p.src_embed = Mat::Zero(dims.source_vocab, d);
  p.enc_in = Mat::Zero(d, d);
  p.enc_rec = Mat::Zero(d, d);
  p.enc_bias = Vec::Zero(d);
  p.tgt_embed = Mat::Zero(dims.target_vocab, d);
  p.dec_in = Mat::Zero(d, d);
  p.dec_rec = Mat::Zero(d, d);
  p.dec_ctx = Mat::Zero(d, d);
  p.dec_bias = Vec::Zero(d);
  p.out_proj = Mat::Zero(dims.target_vocab, d);
  p.out_bias = Vec::Zero(dims.target_vocab);
  return p;
}

ModelParams ModelParams::random(const ModelDims& dims, std::uint64_t seed, double scale) {
  ModelParams p = zeros(dims);
  if (scale <= 0.0) scale = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  p.for_each_block([&](const std::string&, std::span<double> block) {
    for (double& v : block) v = u(rng);
  });
  return p;
}

ModelDims ModelParams::dims() const {
  return {static_cast<int>(src_embed.rows()), static_cast<int>(tgt_embed.rows()),
          static_cast<int>(enc_bias.size())};
}

void ModelParams::validate() const {
  const auto d = dims();
  check_dims(d);
  const Eigen::Index h = d.hidden;
  auto expect = [](const Mat& m, Eigen::Index r, Eigen::Index c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw InvalidArgument(std::string("model params: block ") + name + " has shape " +
                            std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                            ", expected " + std::to_string(r) + "x" + std::to_string(c));
    }
  };
  expect(src_embed, d.source_vocab, h, "src_embed");
  expect(enc_in, h, h, "enc_in");
  expect(enc_rec, h, h, "enc_rec");
  expect(tgt_embed, d.target_vocab, h, "tgt_embed");
  expect(dec_in, h, h, "dec_in");
  expect(dec_rec, h, h, "dec_rec");
  expect(dec_ctx, h, h, "dec_ctx");
  expect(out_proj, d.target_vocab, h, "out_proj");
  if (dec_bias.size() != h || out_bias.size() != d.target_vocab) {
    throw InvalidArgument("model params: bias sizes inconsistent");
  }
  for_each_block([](const std::string& name, std::span<const double> block) {
    for (double v : block) {
      if (!std::isfinite(v)) throw InvalidArgument("model params: non-finite entry in " + name);
    }
  });
}

std::size_t ModelParams::num_parameters() const {
  std::size_t n = 0;
  for_each_block([&](const std::string&, std::span<const double> b) { n += b.size(); });
  return n;
}

void ModelParams::for_each_block(
    const std::function<void(const std::string&, std::span<double>)>& f) {
  visit_blocks(*this, [&](const char* name, auto& m) {
    f(name, std::span<double>(m.data(), static_cast<std::size_t>(m.size())));
  });
}

void ModelParams::for_each_block(
    const std::function<void(const std::string&, std::span<const double>)>& f) const {
  visit_blocks(*this, [&](const char* name, const auto& m) {
    f(name, std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
  });
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> out;
  out.reserve(num_parameters());
  for_each_block([&](const std::string&, std::span<const double> b) {
    out.insert(out.end(), b.begin(), b.end());
  });
  return out;
}

void ModelParams::assign_flat(std::span<const double> values) {
  if (values.size() != num_parameters()) {
    throw InvalidArgument("model params: flat vector has wrong length");
  }
  std::size_t offset = 0;
  for_each_block([&](const std::string&, std::span<double> b) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), b.size(), b.begin());
    offset += b.size();
  });
}

void ModelParams::set_zero() {
  for_each_block([](const std::string&, std::span<double> b) { std::fill(b.begin(), b.end(), 0.0); });
}

std::uint64_t ModelParams::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for_each_block([&](const std::string&, std::span<const double> b) {
    for (double v : b) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
      }
    }
  });
  return h;
}

Encoding encode(const ModelParams& params, std::span<const TokenId> source) {
  if (source.empty()) throw InvalidArgument("encode: empty source");
  Encoding enc;
  enc.states.reserve(source.size());
  Vec prev = Vec::Zero(params.enc_bias.size());
  for (TokenId x : source) {
    check_token(x, params.src_embed.rows(), "source");
    Vec a = params.enc_in * params.src_embed.row(x).transpose() + params.enc_rec * prev +
            params.enc_bias;
    prev = a.array().tanh().matrix();
    enc.states.push_back(prev);
  }
  return enc;
}

Vec transition(const ModelParams& params, const Vec& prev_hidden, TokenId prev_token,
               const Vec& context) {
  const Eigen::Index d = params.dec_bias.size();
  if (prev_hidden.size() != d || context.size() != d) {
    throw InvalidArgument("transition: hidden size " + std::to_string(prev_hidden.size()) +
                          " / context size " + std::to_string(context.size()) +
                          " do not match model hidden size " + std::to_string(d));
  }
  check_token(prev_token, params.tgt_embed.rows(), "target");
  Vec a = params.dec_in * params.tgt_embed.row(prev_token).transpose() +
          params.dec_rec * prev_hidden + params.dec_ctx * context + params.dec_bias;
  return a.array().tanh().matrix();
}

void transition_backward(const ModelParams& params, const Vec& prev_hidden, TokenId prev_token,
                         const Vec& context, const Vec& hidden, const Vec& d_hidden,
                         ModelParams& grads, Vec& d_prev_hidden, Vec& d_context) {
  const Vec da = (d_hidden.array() * (1.0 - hidden.array().square())).matrix();
  const Vec emb = params.tgt_embed.row(prev_token).transpose();
  grads.dec_in.noalias() += da * emb.transpose();
  grads.tgt_embed.row(prev_token).noalias() += (params.dec_in.transpose() * da).transpose();
  grads.dec_rec.noalias() += da * prev_hidden.transpose();
  grads.dec_ctx.noalias() += da * context.transpose();
  grads.dec_bias += da;
  d_prev_hidden.noalias() += params.dec_rec.transpose() * da;
  d_context.noalias() += params.dec_ctx.transpose() * da;
}

Vec output_logits(const ModelParams& params, const Vec& hidden) {
  if (hidden.size() != params.out_proj.cols()) {
    throw InvalidArgument("token_dist: hidden size " + std::to_string(hidden.size()) +
                          " does not match output projection");
  }
  return params.out_proj * hidden + params.out_bias;
}

Categorical token_dist(const ModelParams& params, const Vec& hidden) {
  const Vec z = output_logits(params, hidden);
  return softmax(Logits(std::vector<double>(z.data(), z.data() + z.size())));
}

ForwardPass teacher_forced(const ModelParams& params, std::span<const TokenId> source,
                           std::span<const TokenId> target) {
  ForwardPass pass;
  pass.encoding = encode(params, source);
  const Vec& c = pass.encoding.context();
  pass.hidden.reserve(target.size());
  pass.logits.reserve(target.size());
  Vec prev = c;
  TokenId prev_token = Vocab::kBos;
  for (TokenId y : target) {
    Vec h = transition(params, prev, prev_token, c);
    pass.logits.push_back(output_logits(params, h));
    pass.hidden.push_back(h);
    prev = std::move(h);
    prev_token = y;
  }
  return pass;
}

std::vector<Categorical> position_dists(const ModelParams& params, std::span<const TokenId> source,
                                        std::span<const TokenId> target) {
  const auto pass = teacher_forced(params, source, target);
  std::vector<Categorical> out;
  out.reserve(pass.logits.size());
  for (const auto& z : pass.logits) {
    out.push_back(softmax(Logits(std::vector<double>(z.data(), z.data() + z.size()))));
  }
  return out;
}

void backward(const ModelParams& params, const ForwardPass& pass, std::span<const TokenId> source,
              std::span<const TokenId> target, std::span<const Vec> d_logits, ModelParams& grads) {
  const std::size_t T = target.size();
  if (d_logits.size() != T || pass.hidden.size() != T) {
    throw InvalidArgument("backward: gradient count does not match target length");
  }
  const Eigen::Index d = params.dec_bias.size();
  const Vec& c = pass.encoding.context();
  Vec d_context = Vec::Zero(d);
  Vec d_h = Vec::Zero(d);
  for (std::size_t t = T; t-- > 0;) {
    const Vec& h = pass.hidden[t];
    grads.out_proj.noalias() += d_logits[t] * h.transpose();
    grads.out_bias += d_logits[t];
    d_h.noalias() += params.out_proj.transpose() * d_logits[t];
    const Vec& prev = t == 0 ? c : pass.hidden[t - 1];
    const TokenId prev_token = t == 0 ? Vocab::kBos : target[t - 1];
    Vec d_prev = Vec::Zero(d);
    transition_backward(params, prev, prev_token, c, h, d_h, grads, d_prev, d_context);
    if (t == 0) {
      d_context += d_prev;
    } else {
      d_h = std::move(d_prev);
    }
  }

  // Encoder.
  Vec d_s = d_context;
  for (std::size_t i = source.size(); i-- > 0;) {
    const Vec& s = pass.encoding.states[i];
    const Vec da = (d_s.array() * (1.0 - s.array().square())).matrix();
    const TokenId x = source[i];
    grads.enc_in.noalias() += da * params.src_embed.row(x);
    grads.src_embed.row(x).noalias() += (params.enc_in.transpose() * da).transpose();
    grads.enc_bias += da;
    if (i > 0) {
      grads.enc_rec.noalias() += da * pass.encoding.states[i - 1].transpose();
      d_s = params.enc_rec.transpose() * da;
    }
  }
}

double sequence_logprob(const ModelParams& params, const SentencePair& pair) {
  const auto pass = teacher_forced(params, pair.source, pair.target);
  double total = 0.0;
  for (std::size_t t = 0; t < pair.target.size(); ++t) {
    const auto& z = pass.logits[t];
    total += z[pair.target[t]] - log_sum_exp(std::span<const double>(z.data(), z.size()));
  }
  return total;
}

}  // namespace ktlab::seq
