#pragma once

// Minimal decoder-only transformer over hyperparameter token sequences, with
// hand-written reverse-mode gradients, AdamW training and a binary
// checkpoint format.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "spsro/dataset.hpp"
#include "spsro/tokenizer.hpp"

namespace spsro {

struct ModelConfig {
  int blocks = 2;
  int heads = 4;
  int embed_dim = 128;
  int context_epochs = 50;
  int q = 20;
  GameMode mode = GameMode::kExtensiveForm;
  int num_solvers = 3;
  double dropout = 0.1;

  std::size_t tokens_per_epoch() const { return spsro::tokens_per_epoch(mode, static_cast<std::size_t>(num_solvers)); }
  std::size_t max_tokens() const { return static_cast<std::size_t>(context_epochs) * tokens_per_epoch(); }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  std::size_t batch = 64;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;
  double weight_decay = 0.1;
  double warmup_tokens = 5000;
  /// End of the cosine decay, in predicted tokens. Defaults to
  /// 2 * context_epochs * |D| * tokens_per_epoch.
  std::optional<double> final_tokens;
  int epochs = 50;
  std::uint64_t seed = 0;
};

/// A named slice of the flat parameter vector. Matrices are row-major with
/// shape {rows, cols}; `decay` marks weights that receive weight decay.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::vector<std::size_t> shape;
  bool decay = false;

  std::size_t size() const;
};

/// Parameter blocks in storage (and checkpoint) order:
/// input.weight [P, d], input.bias [P, d], epoch_embedding [E, d], then per
/// block i: block{i}.ln1.{weight,bias} [d], block{i}.attn.qkv.weight [d, 3d],
/// block{i}.attn.qkv.bias [3d], block{i}.attn.proj.weight [d, d],
/// block{i}.attn.proj.bias [d], block{i}.ln2.{weight,bias} [d],
/// block{i}.mlp.fc.weight [d, 4d], block{i}.mlp.fc.bias [4d],
/// block{i}.mlp.proj.weight [4d, d], block{i}.mlp.proj.bias [d]; finally
/// ln_f.{weight,bias} [d] and head.weight [Q, d]. P is the number of token
/// slots per epoch and E the context length in epochs.
std::vector<ParamBlock> parameter_layout(const ModelConfig& config);

/// The network. Each token is embedded as w[slot] * v + b[slot] plus the
/// learned embedding of its epoch, where v = (token + 0.5) / Q is the token's
/// normalized bin center and slot its position within the epoch. Pre-norm
/// blocks apply causal multi-head attention and a 4x GELU MLP; a final
/// layer norm and a bias-free head give Q logits per position. Position n
/// predicts token n + 1.
template <typename T>
class TransformerModel {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  explicit TransformerModel(ModelConfig config);

  /// Weights ~ N(0, 0.02), biases 0, layer-norm gains 1.
  static TransformerModel initialized(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<ParamBlock>& layout() const { return layout_; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }
  const ParamBlock& block(std::string_view name) const;
  std::span<T> block_values(std::string_view name);
  std::span<const T> block_values(std::string_view name) const;

  void zero_head();

  /// Per-position log-probabilities (rows) over the Q bins, without dropout.
  Matrix log_probs(std::span<const int> tokens) const;

  /// Mean negative log-likelihood of tokens 2..L given their prefixes.
  T loss(std::span<const int> tokens) const;

  /// Loss as above; adds d loss / d params into `grad`. Dropout is applied
  /// with masks drawn from `dropout_seed` when given.
  T loss_and_gradient(std::span<const int> tokens, std::vector<T>& grad,
                      std::optional<std::uint64_t> dropout_seed = std::nullopt) const;

 private:
  struct Cache;
  void check_tokens(std::span<const int> tokens) const;
  Matrix forward(std::span<const int> tokens, std::optional<std::uint64_t> dropout_seed, Cache* cache) const;

  ModelConfig config_;
  std::vector<ParamBlock> layout_;
  std::vector<T> params_;
};

extern template class TransformerModel<float>;
extern template class TransformerModel<double>;

using Transformer = TransformerModel<float>;

/// A trained model with what inference needs besides the weights.
struct TrainedModel {
  Transformer model{ModelConfig{}};
  QuantizationSpec quantization;
  SolverSet solvers;
  /// Distribution of the first token of a sequence, which the network never
  /// predicts. Estimated from the training data with add-one smoothing.
  std::vector<float> first_token_prior;
};

struct TrainResult {
  TrainedModel trained;
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

/// Fits `model` on the sequences. Deterministic given config.seed.
std::vector<double> train_on_sequences(Transformer& model, std::span<const TokenSequence> sequences,
                                       const TrainConfig& config);

/// Builds a model for the dataset (mode, solver count, Q and context length
/// come from the dataset; the rest from `model_config`) and trains it.
/// Throws InvalidArgument if model_config.mode differs from the dataset's.
TrainResult train(const Dataset& dataset, ModelConfig model_config, const TrainConfig& config);

/// Learning-rate multiplier after `tokens` predicted tokens: linear warmup,
/// then a half cosine from 1 to 0 at final_tokens, floored at 0.1.
double lr_multiplier(double tokens, double warmup_tokens, double final_tokens);

std::vector<float> first_token_prior(std::span<const TokenSequence> sequences, int q);

inline constexpr std::string_view kCheckpointMagic = "SPSRO-TF";
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
/// Throws LoadError on a bad magic, version, truncation or trailing bytes.
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace spsro
