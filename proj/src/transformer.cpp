#include "spsro/transformer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "spsro/errors.hpp"
#include "spsro/rng.hpp"

namespace spsro {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

// derive_seed tags used by training.
constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kShuffleStream = 12;
constexpr std::uint64_t kDropoutStream = 13;

}  // namespace

void ModelConfig::validate() const {
  if (blocks < 1) throw InvalidArgument("model needs at least one block");
  if (heads < 1 || embed_dim < 1) throw InvalidArgument("model heads and embed_dim must be positive");
  if (embed_dim % heads != 0) throw InvalidArgument("embed_dim must be divisible by heads");
  if (context_epochs < 1) throw InvalidArgument("context_epochs must be positive");
  if (q < 2) throw InvalidArgument("quantization level must be at least 2");
  if (num_solvers < 1) throw InvalidArgument("model needs at least one solver slot");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must lie in [0, 1)");
}

std::size_t ParamBlock::size() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::vector<ParamBlock> parameter_layout(const ModelConfig& config) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.embed_dim);
  const auto slots = config.tokens_per_epoch();
  std::vector<ParamBlock> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<std::size_t> shape, bool decay) {
    ParamBlock block{std::move(name), offset, std::move(shape), decay};
    offset += block.size();
    out.push_back(std::move(block));
  };
  add("input.weight", {slots, d}, true);
  add("input.bias", {slots, d}, false);
  add("epoch_embedding", {static_cast<std::size_t>(config.context_epochs), d}, false);
  for (int b = 0; b < config.blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    add(p + "ln1.weight", {d}, false);
    add(p + "ln1.bias", {d}, false);
    add(p + "attn.qkv.weight", {d, 3 * d}, true);
    add(p + "attn.qkv.bias", {3 * d}, false);
    add(p + "attn.proj.weight", {d, d}, true);
    add(p + "attn.proj.bias", {d}, false);
    add(p + "ln2.weight", {d}, false);
    add(p + "ln2.bias", {d}, false);
    add(p + "mlp.fc.weight", {d, 4 * d}, true);
    add(p + "mlp.fc.bias", {4 * d}, false);
    add(p + "mlp.proj.weight", {4 * d, d}, true);
    add(p + "mlp.proj.bias", {d}, false);
  }
  add("ln_f.weight", {d}, false);
  add("ln_f.bias", {d}, false);
  add("head.weight", {static_cast<std::size_t>(config.q), d}, true);
  return out;
}

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <typename T>
void layer_norm(const RowMatrix<T>& x, const T* gamma, const T* beta, RowMatrix<T>& xhat, ColVector<T>& rstd,
                RowMatrix<T>& y) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index d = x.cols();
  xhat.resize(rows, d);
  y.resize(rows, d);
  rstd.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const T mean = x.row(i).mean();
    const T var = (x.row(i).array() - mean).square().mean();
    const T r = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    rstd[i] = r;
    for (Eigen::Index j = 0; j < d; ++j) {
      xhat(i, j) = (x(i, j) - mean) * r;
      y(i, j) = xhat(i, j) * gamma[j] + beta[j];
    }
  }
}

template <typename T>
RowMatrix<T> layer_norm_backward(const RowMatrix<T>& dy, const RowMatrix<T>& xhat, const ColVector<T>& rstd,
                                 const T* gamma, T* dgamma, T* dbeta) {
  const Eigen::Index rows = dy.rows();
  const Eigen::Index d = dy.cols();
  RowMatrix<T> dx(rows, d);
  RowVector<T> dxhat(d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      dgamma[j] += dy(i, j) * xhat(i, j);
      dbeta[j] += dy(i, j);
      dxhat[j] = dy(i, j) * gamma[j];
    }
    const T mean_dxhat = dxhat.mean();
    const T mean_dxhat_xhat = (dxhat.array() * xhat.row(i).array()).mean();
    for (Eigen::Index j = 0; j < d; ++j) {
      dx(i, j) = rstd[i] * (dxhat[j] - mean_dxhat - xhat(i, j) * mean_dxhat_xhat);
    }
  }
  return dx;
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_derivative(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

}  // namespace

template <typename T>
struct TransformerModel<T>::Cache {
  struct Block {
    Matrix x_in;
    Matrix ln1_hat;
    ColVector<T> ln1_rstd;
    Matrix h1;
    Matrix qkv;
    std::vector<Matrix> probs;       // per head, softmax over j <= i
    std::vector<Matrix> probs_mask;  // per head dropout masks, empty without dropout
    Matrix att;
    Matrix proj_mask;
    Matrix x_mid;
    Matrix ln2_hat;
    ColVector<T> ln2_rstd;
    Matrix h2;
    Matrix fc;
    Matrix act;
    Matrix mlp_mask;
  };
  Matrix emb_mask;
  std::vector<Block> blocks;
  Matrix lnf_hat;
  ColVector<T> lnf_rstd;
  Matrix hf;
};

template <typename T>
TransformerModel<T>::TransformerModel(ModelConfig config)
    : config_(config), layout_(parameter_layout(config_)) {
  params_.assign(layout_.back().offset + layout_.back().size(), T(0));
  for (const auto& b : layout_) {
    if (b.name.ends_with("ln1.weight") || b.name.ends_with("ln2.weight") || b.name == "ln_f.weight") {
      std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size(), T(1));
    }
  }
}

template <typename T>
TransformerModel<T> TransformerModel<T>::initialized(ModelConfig config, std::uint64_t seed) {
  TransformerModel model(config);
  Rng rng(seed);
  for (const auto& b : model.layout_) {
    const bool random = b.decay || b.name == "epoch_embedding";
    if (!random) continue;
    for (std::size_t i = 0; i < b.size(); ++i) model.params_[b.offset + i] = static_cast<T>(kInitStd * rng.normal());
  }
  return model;
}

template <typename T>
const ParamBlock& TransformerModel<T>::block(std::string_view name) const {
  for (const auto& b : layout_) {
    if (b.name == name) return b;
  }
  throw InvalidArgument("unknown parameter block '" + std::string(name) + "'");
}

template <typename T>
std::span<T> TransformerModel<T>::block_values(std::string_view name) {
  const auto& b = block(name);
  return std::span<T>(params_.data() + b.offset, b.size());
}

template <typename T>
std::span<const T> TransformerModel<T>::block_values(std::string_view name) const {
  const auto& b = block(name);
  return std::span<const T>(params_.data() + b.offset, b.size());
}

template <typename T>
void TransformerModel<T>::zero_head() {
  auto head = block_values("head.weight");
  std::fill(head.begin(), head.end(), T(0));
}

template <typename T>
void TransformerModel<T>::check_tokens(std::span<const int> tokens) const {
  if (tokens.empty()) throw InvalidArgument("transformer input is empty");
  if (tokens.size() > config_.max_tokens()) {
    throw InvalidArgument("sequence of " + std::to_string(tokens.size()) + " tokens exceeds the context of " +
                          std::to_string(config_.max_tokens()));
  }
  for (int t : tokens) {
    if (t < 0 || t >= config_.q) throw InvalidArgument("token " + std::to_string(t) + " outside [0, Q)");
  }
}

template <typename T>
typename TransformerModel<T>::Matrix TransformerModel<T>::forward(std::span<const int> tokens,
                                                                  std::optional<std::uint64_t> dropout_seed,
                                                                  Cache* cache) const {
  check_tokens(tokens);
  using ConstMap = Eigen::Map<const Matrix>;
  const Eigen::Index d = config_.embed_dim;
  const Eigen::Index heads = config_.heads;
  const Eigen::Index dh = d / heads;
  const auto length = static_cast<Eigen::Index>(tokens.size());
  const auto slots = config_.tokens_per_epoch();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  auto at = [&](std::string_view name) { return params_.data() + block(name).offset; };

  const bool drop = dropout_seed.has_value() && config_.dropout > 0.0;
  Rng rng(dropout_seed.value_or(0));
  const T keep_scale = static_cast<T>(1.0 / (1.0 - config_.dropout));
  auto make_mask = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix mask(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = rng.uniform() < config_.dropout ? T(0) : keep_scale;
    return mask;
  };

  const ConstMap w_in(at("input.weight"), static_cast<Eigen::Index>(slots), d);
  const ConstMap b_in(at("input.bias"), static_cast<Eigen::Index>(slots), d);
  const ConstMap epoch_emb(at("epoch_embedding"), config_.context_epochs, d);
  Matrix x(length, d);
  for (Eigen::Index n = 0; n < length; ++n) {
    const auto slot = static_cast<Eigen::Index>(static_cast<std::size_t>(n) % slots);
    const auto epoch = static_cast<Eigen::Index>(static_cast<std::size_t>(n) / slots);
    const T v = (static_cast<T>(tokens[static_cast<std::size_t>(n)]) + T(0.5)) / static_cast<T>(config_.q);
    x.row(n) = w_in.row(slot) * v + b_in.row(slot) + epoch_emb.row(epoch);
  }
  if (drop) {
    Matrix mask = make_mask(length, d);
    x = x.cwiseProduct(mask);
    if (cache) cache->emb_mask = std::move(mask);
  }
  if (cache) cache->blocks.resize(static_cast<std::size_t>(config_.blocks));

  for (int b = 0; b < config_.blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    typename Cache::Block local;
    auto& bc = cache ? cache->blocks[static_cast<std::size_t>(b)] : local;
    bc.x_in = x;
    layer_norm<T>(bc.x_in, at(p + "ln1.weight"), at(p + "ln1.bias"), bc.ln1_hat, bc.ln1_rstd, bc.h1);
    const ConstMap w_qkv(at(p + "attn.qkv.weight"), d, 3 * d);
    const Eigen::Map<const RowVector<T>> b_qkv(at(p + "attn.qkv.bias"), 3 * d);
    bc.qkv = bc.h1 * w_qkv;
    bc.qkv.rowwise() += b_qkv;

    bc.att = Matrix::Zero(length, d);
    bc.probs.assign(static_cast<std::size_t>(heads), Matrix());
    bc.probs_mask.assign(static_cast<std::size_t>(heads), Matrix());
    std::vector<T> scores(static_cast<std::size_t>(length));
    for (Eigen::Index h = 0; h < heads; ++h) {
      Matrix& probs = bc.probs[static_cast<std::size_t>(h)];
      probs = Matrix::Zero(length, length);
      const Eigen::Index qo = h * dh;
      const Eigen::Index ko = d + h * dh;
      const Eigen::Index vo = 2 * d + h * dh;
      for (Eigen::Index i = 0; i < length; ++i) {
        T max_score = -std::numeric_limits<T>::infinity();
        for (Eigen::Index j = 0; j <= i; ++j) {
          T s = 0;
          for (Eigen::Index c = 0; c < dh; ++c) s += bc.qkv(i, qo + c) * bc.qkv(j, ko + c);
          scores[static_cast<std::size_t>(j)] = s * scale;
          max_score = std::max(max_score, scores[static_cast<std::size_t>(j)]);
        }
        T total = 0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          const T e = std::exp(scores[static_cast<std::size_t>(j)] - max_score);
          probs(i, j) = e;
          total += e;
        }
        for (Eigen::Index j = 0; j <= i; ++j) probs(i, j) /= total;
      }
      Matrix used = probs;
      if (drop) {
        Matrix& mask = bc.probs_mask[static_cast<std::size_t>(h)];
        mask = Matrix::Zero(length, length);
        for (Eigen::Index i = 0; i < length; ++i)
          for (Eigen::Index j = 0; j <= i; ++j) mask(i, j) = rng.uniform() < config_.dropout ? T(0) : keep_scale;
        used = probs.cwiseProduct(mask);
      }
      for (Eigen::Index i = 0; i < length; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
          const T w = used(i, j);
          for (Eigen::Index c = 0; c < dh; ++c) bc.att(i, qo + c) += w * bc.qkv(j, vo + c);
        }
      }
    }

    const ConstMap w_proj(at(p + "attn.proj.weight"), d, d);
    const Eigen::Map<const RowVector<T>> b_proj(at(p + "attn.proj.bias"), d);
    Matrix proj = bc.att * w_proj;
    proj.rowwise() += b_proj;
    if (drop) {
      bc.proj_mask = make_mask(length, d);
      proj = proj.cwiseProduct(bc.proj_mask);
    }
    bc.x_mid = bc.x_in + proj;

    layer_norm<T>(bc.x_mid, at(p + "ln2.weight"), at(p + "ln2.bias"), bc.ln2_hat, bc.ln2_rstd, bc.h2);
    const ConstMap w_fc(at(p + "mlp.fc.weight"), d, 4 * d);
    const Eigen::Map<const RowVector<T>> b_fc(at(p + "mlp.fc.bias"), 4 * d);
    bc.fc = bc.h2 * w_fc;
    bc.fc.rowwise() += b_fc;
    bc.act = bc.fc.unaryExpr([](T v) { return gelu(v); });
    const ConstMap w_mp(at(p + "mlp.proj.weight"), 4 * d, d);
    const Eigen::Map<const RowVector<T>> b_mp(at(p + "mlp.proj.bias"), d);
    Matrix mlp = bc.act * w_mp;
    mlp.rowwise() += b_mp;
    if (drop) {
      bc.mlp_mask = make_mask(length, d);
      mlp = mlp.cwiseProduct(bc.mlp_mask);
    }
    x = bc.x_mid + mlp;
  }

  Matrix lnf_hat;
  ColVector<T> lnf_rstd;
  Matrix hf;
  layer_norm<T>(x, at("ln_f.weight"), at("ln_f.bias"), lnf_hat, lnf_rstd, hf);
  const ConstMap head(at("head.weight"), config_.q, d);
  Matrix logits = hf * head.transpose();
  for (Eigen::Index n = 0; n < length; ++n) {
    const T max_logit = logits.row(n).maxCoeff();
    T total = 0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) total += std::exp(logits(n, k) - max_logit);
    const T log_total = std::log(total) + max_logit;
    logits.row(n).array() -= log_total;
  }
  if (cache) {
    cache->lnf_hat = std::move(lnf_hat);
    cache->lnf_rstd = std::move(lnf_rstd);
    cache->hf = std::move(hf);
  }
  return logits;
}

template <typename T>
typename TransformerModel<T>::Matrix TransformerModel<T>::log_probs(std::span<const int> tokens) const {
  return forward(tokens, std::nullopt, nullptr);
}

template <typename T>
T TransformerModel<T>::loss(std::span<const int> tokens) const {
  if (tokens.size() < 2) throw InvalidArgument("loss needs at least two tokens");
  const Matrix logp = log_probs(tokens);
  T total = 0;
  for (std::size_t n = 0; n + 1 < tokens.size(); ++n) total -= logp(static_cast<Eigen::Index>(n), tokens[n + 1]);
  return total / static_cast<T>(tokens.size() - 1);
}

template <typename T>
T TransformerModel<T>::loss_and_gradient(std::span<const int> tokens, std::vector<T>& grad,
                                         std::optional<std::uint64_t> dropout_seed) const {
  if (tokens.size() < 2) throw InvalidArgument("loss needs at least two tokens");
  if (grad.size() != params_.size()) throw InvalidArgument("gradient buffer has the wrong size");
  using ConstMap = Eigen::Map<const Matrix>;
  using GradMap = Eigen::Map<Matrix>;
  using GradRow = Eigen::Map<RowVector<T>>;

  Cache cache;
  const Matrix logp = forward(tokens, dropout_seed, &cache);
  const Eigen::Index d = config_.embed_dim;
  const Eigen::Index heads = config_.heads;
  const Eigen::Index dh = d / heads;
  const auto length = static_cast<Eigen::Index>(tokens.size());
  const auto slots = config_.tokens_per_epoch();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  auto at = [&](std::string_view name) { return params_.data() + block(name).offset; };
  auto g = [&](std::string_view name) { return grad.data() + block(name).offset; };

  const T count = static_cast<T>(length - 1);
  T loss_value = 0;
  Matrix dlogits = Matrix::Zero(length, config_.q);
  for (Eigen::Index n = 0; n + 1 < length; ++n) {
    const int target = tokens[static_cast<std::size_t>(n + 1)];
    loss_value -= logp(n, target);
    dlogits.row(n) = logp.row(n).array().exp();
    dlogits(n, target) -= T(1);
  }
  dlogits /= count;
  loss_value /= count;

  const ConstMap head(at("head.weight"), config_.q, d);
  GradMap(g("head.weight"), config_.q, d).noalias() += dlogits.transpose() * cache.hf;
  Matrix dhf = dlogits * head;
  Matrix dx = layer_norm_backward<T>(dhf, cache.lnf_hat, cache.lnf_rstd, at("ln_f.weight"), g("ln_f.weight"),
                                     g("ln_f.bias"));

  for (int b = config_.blocks - 1; b >= 0; --b) {
    const std::string p = "block" + std::to_string(b) + ".";
    const auto& bc = cache.blocks[static_cast<std::size_t>(b)];

    // MLP branch.
    Matrix dmlp = bc.mlp_mask.size() ? Matrix(dx.cwiseProduct(bc.mlp_mask)) : dx;
    GradMap(g(p + "mlp.proj.weight"), 4 * d, d).noalias() += bc.act.transpose() * dmlp;
    GradRow(g(p + "mlp.proj.bias"), d) += dmlp.colwise().sum();
    Matrix dact = dmlp * ConstMap(at(p + "mlp.proj.weight"), 4 * d, d).transpose();
    Matrix dfc = dact.cwiseProduct(bc.fc.unaryExpr([](T v) { return gelu_derivative(v); }));
    GradMap(g(p + "mlp.fc.weight"), d, 4 * d).noalias() += bc.h2.transpose() * dfc;
    GradRow(g(p + "mlp.fc.bias"), 4 * d) += dfc.colwise().sum();
    Matrix dh2 = dfc * ConstMap(at(p + "mlp.fc.weight"), d, 4 * d).transpose();
    Matrix dx_mid = dx + layer_norm_backward<T>(dh2, bc.ln2_hat, bc.ln2_rstd, at(p + "ln2.weight"),
                                                g(p + "ln2.weight"), g(p + "ln2.bias"));

    // Attention branch.
    Matrix dproj = bc.proj_mask.size() ? Matrix(dx_mid.cwiseProduct(bc.proj_mask)) : dx_mid;
    GradMap(g(p + "attn.proj.weight"), d, d).noalias() += bc.att.transpose() * dproj;
    GradRow(g(p + "attn.proj.bias"), d) += dproj.colwise().sum();
    Matrix datt = dproj * ConstMap(at(p + "attn.proj.weight"), d, d).transpose();

    Matrix dqkv = Matrix::Zero(length, 3 * d);
    std::vector<T> dprobs(static_cast<std::size_t>(length));
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Matrix& probs = bc.probs[static_cast<std::size_t>(h)];
      const Matrix& mask = bc.probs_mask[static_cast<std::size_t>(h)];
      const bool masked = mask.size() > 0;
      const Eigen::Index qo = h * dh;
      const Eigen::Index ko = d + h * dh;
      const Eigen::Index vo = 2 * d + h * dh;
      for (Eigen::Index i = 0; i < length; ++i) {
        T weighted = 0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          T dused = 0;
          for (Eigen::Index c = 0; c < dh; ++c) dused += datt(i, qo + c) * bc.qkv(j, vo + c);
          const T used = masked ? probs(i, j) * mask(i, j) : probs(i, j);
          for (Eigen::Index c = 0; c < dh; ++c) dqkv(j, vo + c) += used * datt(i, qo + c);
          const T dp = masked ? dused * mask(i, j) : dused;
          dprobs[static_cast<std::size_t>(j)] = dp;
          weighted += probs(i, j) * dp;
        }
        for (Eigen::Index j = 0; j <= i; ++j) {
          const T ds = probs(i, j) * (dprobs[static_cast<std::size_t>(j)] - weighted) * scale;
          for (Eigen::Index c = 0; c < dh; ++c) {
            dqkv(i, qo + c) += ds * bc.qkv(j, ko + c);
            dqkv(j, ko + c) += ds * bc.qkv(i, qo + c);
          }
        }
      }
    }
    GradMap(g(p + "attn.qkv.weight"), d, 3 * d).noalias() += bc.h1.transpose() * dqkv;
    GradRow(g(p + "attn.qkv.bias"), 3 * d) += dqkv.colwise().sum();
    Matrix dh1 = dqkv * ConstMap(at(p + "attn.qkv.weight"), d, 3 * d).transpose();
    dx = dx_mid + layer_norm_backward<T>(dh1, bc.ln1_hat, bc.ln1_rstd, at(p + "ln1.weight"), g(p + "ln1.weight"),
                                         g(p + "ln1.bias"));
  }

  if (cache.emb_mask.size()) dx = dx.cwiseProduct(cache.emb_mask);
  GradMap dw_in(g("input.weight"), static_cast<Eigen::Index>(slots), d);
  GradMap db_in(g("input.bias"), static_cast<Eigen::Index>(slots), d);
  GradMap demb(g("epoch_embedding"), config_.context_epochs, d);
  for (Eigen::Index n = 0; n < length; ++n) {
    const auto slot = static_cast<Eigen::Index>(static_cast<std::size_t>(n) % slots);
    const auto epoch = static_cast<Eigen::Index>(static_cast<std::size_t>(n) / slots);
    const T v = (static_cast<T>(tokens[static_cast<std::size_t>(n)]) + T(0.5)) / static_cast<T>(config_.q);
    dw_in.row(slot) += dx.row(n) * v;
    db_in.row(slot) += dx.row(n);
    demb.row(epoch) += dx.row(n);
  }
  return loss_value;
}

template class TransformerModel<float>;
template class TransformerModel<double>;

double lr_multiplier(double tokens, double warmup_tokens, double final_tokens) {
  if (tokens < warmup_tokens) return tokens / std::max(1.0, warmup_tokens);
  const double progress = std::clamp((tokens - warmup_tokens) / std::max(1.0, final_tokens - warmup_tokens), 0.0, 1.0);
  return std::max(0.1, 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

std::vector<float> first_token_prior(std::span<const TokenSequence> sequences, int q) {
  std::vector<double> counts(static_cast<std::size_t>(q), 1.0);
  double total = q;
  for (const auto& s : sequences) {
    if (s.tokens.empty()) continue;
    counts.at(static_cast<std::size_t>(s.tokens.front())) += 1.0;
    total += 1.0;
  }
  std::vector<float> prior;
  prior.reserve(counts.size());
  for (double c : counts) prior.push_back(static_cast<float>(c / total));
  return prior;
}

std::vector<double> train_on_sequences(Transformer& model, std::span<const TokenSequence> sequences,
                                       const TrainConfig& config) {
  const ModelConfig& mc = model.config();
  if (sequences.empty()) throw InvalidArgument("training needs at least one sequence");
  if (config.batch < 1 || config.epochs < 1) throw InvalidArgument("batch and epochs must be positive");
  if (!(config.lr > 0.0) || config.grad_clip <= 0.0 || config.weight_decay < 0.0) {
    throw InvalidArgument("learning rate and clip norm must be positive, weight decay nonnegative");
  }
  for (const auto& s : sequences) {
    if (s.mode != mc.mode || s.num_solvers != static_cast<std::size_t>(mc.num_solvers)) {
      throw InvalidArgument("training sequence layout does not match the model");
    }
    if (s.tokens.size() < 2) throw InvalidArgument("training sequences need at least two tokens");
  }

  const double final_tokens = config.final_tokens.value_or(2.0 * mc.context_epochs *
                                                           static_cast<double>(sequences.size()) *
                                                           static_cast<double>(mc.tokens_per_epoch()));
  auto& params = model.params();
  const std::size_t n_params = params.size();
  std::vector<char> decay(n_params, 0);
  for (const auto& b : model.layout()) {
    if (b.decay) std::fill_n(decay.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size(), 1);
  }
  std::vector<float> m(n_params, 0.0f);
  std::vector<float> v(n_params, 0.0f);
  std::vector<float> grad(n_params);

  Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
  std::vector<std::size_t> order(sequences.size());
  double tokens_seen = 0.0;
  std::uint64_t step = 0;
  std::vector<double> epoch_loss;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      std::fill(grad.begin(), grad.end(), 0.0f);
      const std::uint64_t step_seed = derive_seed(config.seed, kDropoutStream, step);
      for (std::size_t k = start; k < end; ++k) {
        const auto& tokens = sequences[order[k]].tokens;
        loss_sum += model.loss_and_gradient(tokens, grad, derive_seed(step_seed, 0, k - start));
        tokens_seen += static_cast<double>(tokens.size() - 1);
      }
      const auto batch_size = static_cast<float>(end - start);
      double norm_sq = 0.0;
      for (auto& x : grad) {
        x /= batch_size;
        norm_sq += static_cast<double>(x) * x;
      }
      const double norm = std::sqrt(norm_sq);
      if (norm > config.grad_clip) {
        const auto clip = static_cast<float>(config.grad_clip / (norm + 1e-6));
        for (auto& x : grad) x *= clip;
      }

      ++step;
      const double lr = config.lr * lr_multiplier(tokens_seen, config.warmup_tokens, final_tokens);
      const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      const auto b1 = static_cast<float>(config.beta1);
      const auto b2 = static_cast<float>(config.beta2);
      for (std::size_t i = 0; i < n_params; ++i) {
        if (decay[i]) params[i] -= static_cast<float>(lr * config.weight_decay) * params[i];
        m[i] = b1 * m[i] + (1.0f - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0f - b2) * grad[i] * grad[i];
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        params[i] -= static_cast<float>(lr * m_hat / (std::sqrt(v_hat) + config.adam_eps));
      }
    }
    epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return epoch_loss;
}

TrainResult train(const Dataset& dataset, ModelConfig model_config, const TrainConfig& config) {
  if (model_config.mode != dataset.mode) {
    throw InvalidArgument("model mode " + std::string(to_string(model_config.mode)) + " does not match dataset mode " +
                          std::string(to_string(dataset.mode)));
  }
  model_config.num_solvers = static_cast<int>(dataset.solvers.size());
  model_config.q = dataset.quantization.q;
  model_config.context_epochs = static_cast<int>(dataset.context_epochs);
  const auto sequences = encode_dataset(dataset);
  Transformer model = Transformer::initialized(model_config, derive_seed(config.seed, kInitStream));
  std::vector<double> losses = train_on_sequences(model, sequences, config);
  return TrainResult{TrainedModel{std::move(model), dataset.quantization, dataset.solvers,
                                  first_token_prior(sequences, model_config.q)},
                     std::move(losses)};
}

namespace {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > 4096) throw LoadError("checkpoint string length is implausible");
    return raw(n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw LoadError("checkpoint is truncated");
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

void write_block(ByteWriter& w, std::string_view name, const std::vector<std::size_t>& shape,
                 std::span<const float> values) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(shape.size()));
  for (auto dim : shape) w.u32(static_cast<std::uint32_t>(dim));
  for (float v : values) w.f32(v);
}

std::vector<float> read_block(ByteReader& r, std::string_view name, const std::vector<std::size_t>& shape) {
  const std::string got = r.str();
  if (got != name) throw LoadError("checkpoint block '" + got + "' found where '" + std::string(name) + "' expected");
  const std::uint32_t ndim = r.u32();
  if (ndim != shape.size()) throw LoadError("checkpoint block '" + got + "' has the wrong rank");
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint32_t dim = r.u32();
    if (dim != shape[i]) throw LoadError("checkpoint block '" + got + "' has the wrong shape");
    count *= dim;
  }
  std::vector<float> values(count);
  for (auto& v : values) v = r.f32();
  return values;
}

}  // namespace

void save_checkpoint(const TrainedModel& trained, const std::filesystem::path& path) {
  const ModelConfig& c = trained.model.config();
  if (trained.quantization.q != c.q) throw InvalidArgument("quantization level differs from the model's Q");
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.blocks));
  w.u32(static_cast<std::uint32_t>(c.heads));
  w.u32(static_cast<std::uint32_t>(c.embed_dim));
  w.u32(static_cast<std::uint32_t>(c.context_epochs));
  w.u32(static_cast<std::uint32_t>(c.q));
  w.u32(c.mode == GameMode::kNormalForm ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(c.num_solvers));
  w.f64(c.dropout);
  w.u32(static_cast<std::uint32_t>(trained.quantization.q));
  w.u32(static_cast<std::uint32_t>(trained.quantization.k_bar));
  w.f64(trained.quantization.y_min);
  w.f64(trained.quantization.y_max);
  w.u32(static_cast<std::uint32_t>(trained.solvers.size()));
  for (auto id : trained.solvers.ids) w.str(to_string(id));
  const auto& layout = trained.model.layout();
  w.u32(static_cast<std::uint32_t>(layout.size() + 1));
  for (const auto& b : layout) write_block(w, b.name, b.shape, trained.model.block_values(b.name));
  if (trained.first_token_prior.size() != static_cast<std::size_t>(c.q)) {
    throw InvalidArgument("first-token prior must have Q entries");
  }
  write_block(w, "first_token_prior", {static_cast<std::size_t>(c.q)}, trained.first_token_prior);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  ByteReader r{std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>())};
  if (r.raw(kCheckpointMagic.size()) != kCheckpointMagic) throw LoadError("not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw LoadError("unsupported checkpoint version " + std::to_string(version));
  ModelConfig c;
  c.blocks = static_cast<int>(r.u32());
  c.heads = static_cast<int>(r.u32());
  c.embed_dim = static_cast<int>(r.u32());
  c.context_epochs = static_cast<int>(r.u32());
  c.q = static_cast<int>(r.u32());
  c.mode = r.u32() == 0 ? GameMode::kNormalForm : GameMode::kExtensiveForm;
  c.num_solvers = static_cast<int>(r.u32());
  c.dropout = r.f64();
  QuantizationSpec spec;
  spec.q = static_cast<int>(r.u32());
  spec.k_bar = static_cast<int>(r.u32());
  spec.y_min = r.f64();
  spec.y_max = r.f64();
  SolverSet solvers;
  solvers.ids.clear();
  const std::uint32_t n_solvers = r.u32();
  for (std::uint32_t i = 0; i < n_solvers && i < 64; ++i) solvers.ids.push_back(solver_from_string(r.str()));
  try {
    c.validate();
    spec.validate();
  } catch (const Error& e) {
    throw LoadError(std::string("checkpoint header is invalid: ") + e.what());
  }
  if (spec.q != c.q) throw LoadError("checkpoint quantization level differs from the model's");
  if (solvers.size() != static_cast<std::size_t>(c.num_solvers)) throw LoadError("checkpoint solver list has the wrong length");

  Transformer model(c);
  const std::uint32_t n_blocks = r.u32();
  if (n_blocks != model.layout().size() + 1) throw LoadError("checkpoint has the wrong number of parameter blocks");
  for (const auto& b : model.layout()) {
    const auto values = read_block(r, b.name, b.shape);
    std::copy(values.begin(), values.end(), model.block_values(b.name).begin());
  }
  auto prior = read_block(r, "first_token_prior", {static_cast<std::size_t>(c.q)});
  if (!r.done()) throw LoadError("checkpoint has trailing bytes");
  return TrainedModel{std::move(model), spec, std::move(solvers), std::move(prior)};
}

}  // namespace spsro
