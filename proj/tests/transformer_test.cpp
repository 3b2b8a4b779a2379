#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "spsro/errors.hpp"
#include "spsro/hpo_online.hpp"
#include "spsro/transformer.hpp"

namespace {

using namespace spsro;

// Eight tokens: two normal-form epochs with three solver weights and y.
ModelConfig tiny_config(double dropout) {
  ModelConfig c;
  c.blocks = 1;
  c.heads = 2;
  c.embed_dim = 8;
  c.context_epochs = 2;
  c.q = 5;
  c.mode = GameMode::kNormalForm;
  c.num_solvers = 3;
  c.dropout = dropout;
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  return std::filesystem::temp_directory_path() /
         (std::string("spsro_") + info->test_suite_name() + "_" + info->name() + "_" + name);
}

double max_relative_gradient_error(TransformerModel<double>& model, const std::vector<int>& tokens,
                                   std::optional<std::uint64_t> dropout_seed) {
  std::vector<double> grad(model.params().size(), 0.0);
  model.loss_and_gradient(tokens, grad, dropout_seed);
  std::vector<double> scratch(grad.size());
  const double h = 1e-4;
  double worst = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    double& p = model.params()[i];
    const double original = p;
    p = original + h;
    const double up = model.loss_and_gradient(tokens, scratch, dropout_seed);
    p = original - h;
    const double down = model.loss_and_gradient(tokens, scratch, dropout_seed);
    p = original;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - grad[i]) / denom);
  }
  return worst;
}

TEST(Gradient, MatchesCentralDifferences) {
  auto model = TransformerModel<double>::initialized(tiny_config(0.0), 7);
  // Move layer-norm gains and biases off their initial values so every path is exercised.
  for (auto& p : model.params()) p += 0.05 * std::sin(1000.0 * p + 1.0);
  const std::vector<int> tokens{1, 3, 0, 4, 2, 2, 0, 1};
  EXPECT_LT(max_relative_gradient_error(model, tokens, std::nullopt), 1e-4);
}

TEST(Gradient, MatchesCentralDifferencesWithDropout) {
  auto model = TransformerModel<double>::initialized(tiny_config(0.2), 8);
  for (auto& p : model.params()) p += 0.05 * std::sin(1000.0 * p + 2.0);
  const std::vector<int> tokens{4, 0, 1, 3, 3, 2, 1, 0};
  EXPECT_LT(max_relative_gradient_error(model, tokens, 99), 1e-4);
}

TEST(Gradient, UnusedEpochEmbeddingsGetZero) {
  ModelConfig c = tiny_config(0.0);
  c.context_epochs = 5;
  const auto model = TransformerModel<double>::initialized(c, 3);
  std::vector<double> grad(model.params().size(), 0.0);
  model.loss_and_gradient(std::vector<int>{1, 2, 3, 4, 0, 1}, grad);
  const auto& block = model.block("epoch_embedding");
  const std::size_t d = static_cast<std::size_t>(c.embed_dim);
  double used = 0.0;
  for (std::size_t i = 0; i < 2 * d; ++i) used += std::abs(grad[block.offset + i]);
  EXPECT_GT(used, 0.0);
  for (std::size_t i = 2 * d; i < block.size(); ++i) EXPECT_EQ(grad[block.offset + i], 0.0);
}

TEST(Gradient, DuplicatedBatchLeavesMeanGradientUnchanged) {
  const auto model = TransformerModel<double>::initialized(tiny_config(0.0), 4);
  const std::vector<int> tokens{0, 1, 2, 3, 4, 0, 1, 2};
  std::vector<double> single(model.params().size(), 0.0), batch(model.params().size(), 0.0);
  model.loss_and_gradient(tokens, single);
  model.loss_and_gradient(tokens, batch);
  model.loss_and_gradient(tokens, batch);
  // Equal up to accumulation order.
  for (std::size_t i = 0; i < single.size(); ++i) {
    EXPECT_NEAR(batch[i] / 2, single[i], 1e-12 * std::max(1.0, std::abs(single[i])));
  }
}

TEST(Forward, Causality) {
  ModelConfig c = tiny_config(0.1);
  c.q = 20;
  c.context_epochs = 6;
  const auto model = Transformer::initialized(c, 5);
  std::vector<int> tokens{3, 19, 7, 0, 12, 12, 5, 1, 8, 8, 2, 17};
  const auto base = model.log_probs(tokens);
  for (std::size_t n = 1; n < tokens.size(); ++n) {
    auto changed = tokens;
    changed[n] = (changed[n] + 7) % c.q;
    const auto out = model.log_probs(changed);
    for (std::size_t row = 0; row < n; ++row) {
      for (int k = 0; k < c.q; ++k) {
        ASSERT_EQ(std::bit_cast<std::uint32_t>(out(row, k)), std::bit_cast<std::uint32_t>(base(row, k)))
            << "position " << n << " leaked into row " << row;
      }
    }
    bool later_changed = false;
    for (std::size_t row = n; row < tokens.size(); ++row) later_changed |= out.row(row) != base.row(row);
    EXPECT_TRUE(later_changed);
  }
}

TEST(Forward, RowsAreDistributions) {
  ModelConfig c = tiny_config(0.0);
  c.q = 20;
  const auto model = Transformer::initialized(c, 6);
  const auto single = model.log_probs(std::vector<int>{4});
  ASSERT_EQ(single.rows(), 1);
  ASSERT_EQ(single.cols(), 20);
  EXPECT_NEAR(single.array().exp().sum(), 1.0, 1e-5);
  const auto many = model.log_probs(std::vector<int>{4, 5, 6, 7, 8});
  for (Eigen::Index r = 0; r < many.rows(); ++r) EXPECT_NEAR(many.row(r).array().exp().sum(), 1.0, 1e-5);
}

TEST(Forward, ZeroHeadIsUniform) {
  ModelConfig c;
  c.embed_dim = 32;
  c.context_epochs = 10;
  c.q = 20;
  auto model = Transformer::initialized(c, 1);
  model.zero_head();
  std::vector<int> tokens;
  for (int i = 0; i < 60; ++i) tokens.push_back((i * 7) % 20);
  EXPECT_NEAR(model.loss(tokens), std::log(20.0), 1e-6);
  const auto lp = model.log_probs(tokens);
  for (Eigen::Index r = 0; r < lp.rows(); ++r) EXPECT_NEAR(std::exp(lp(r, 3)), 0.05, 1e-6);
}

TEST(Forward, RejectsBadInput) {
  const auto model = Transformer::initialized(tiny_config(0.0), 1);
  EXPECT_THROW(model.log_probs(std::vector<int>{}), InvalidArgument);
  EXPECT_THROW(model.log_probs(std::vector<int>{5}), InvalidArgument);
  EXPECT_THROW(model.log_probs(std::vector<int>(9, 0)), InvalidArgument);
}

TEST(Forward, DeterministicAndOrderSensitive) {
  ModelConfig c = tiny_config(0.3);
  c.q = 20;
  c.context_epochs = 4;
  const auto model = Transformer::initialized(c, 9);
  const std::vector<int> a{1, 9, 4, 15, 7, 7, 3, 2};
  EXPECT_TRUE(model.log_probs(a) == model.log_probs(a));
  std::vector<int> swapped = a;
  std::swap(swapped[0], swapped[1]);
  EXPECT_FALSE(model.log_probs(a).row(7) == model.log_probs(swapped).row(7));
}

TEST(Schedule, WarmupThenCosineToFloor) {
  EXPECT_DOUBLE_EQ(lr_multiplier(0, 100, 1000), 0.0);
  EXPECT_DOUBLE_EQ(lr_multiplier(50, 100, 1000), 0.5);
  EXPECT_DOUBLE_EQ(lr_multiplier(100, 100, 1000), 1.0);
  EXPECT_NEAR(lr_multiplier(550, 100, 1000), 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(lr_multiplier(900, 100, 1000), 0.1);  // cosine already below the floor
  EXPECT_DOUBLE_EQ(lr_multiplier(1000, 100, 1000), 0.1);
  EXPECT_DOUBLE_EQ(lr_multiplier(5000, 100, 1000), 0.1);
}

std::vector<TokenSequence> behavior_sequences(std::size_t runs, int epochs) {
  std::vector<RunTrace> traces;
  RunConfig rc;
  rc.solver.prd.steps = 500;
  for (std::size_t i = 0; i < runs; ++i) {
    OnlineSelector selector(OnlineKind::kRandom, HyperparamRanges{3, 5000, GameMode::kNormalForm}, i);
    traces.push_back(run_spsro(generate_nfg(8, 8, i), selector, epochs, rc, i));
  }
  const Dataset d = make_dataset(traces, GameMode::kNormalForm, SolverSet{}, epochs, 20, 5000);
  return encode_dataset(d);
}

TEST(Training, LossDecreasesOnBehaviorData) {
  const auto seqs = behavior_sequences(100, 8);
  ModelConfig c;
  c.embed_dim = 16;
  c.context_epochs = 8;
  c.mode = GameMode::kNormalForm;
  auto model = Transformer::initialized(c, 2);
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch = 16;
  tc.lr = 3e-3;
  tc.warmup_tokens = 500;
  const auto losses = train_on_sequences(model, seqs, tc);
  ASSERT_EQ(losses.size(), 4u);
  for (double l : losses) EXPECT_TRUE(std::isfinite(l));
  EXPECT_LT(losses.back(), losses.front());
}

TEST(Training, BitIdenticalForSeed) {
  const auto seqs = behavior_sequences(20, 5);
  ModelConfig c;
  c.embed_dim = 16;
  c.context_epochs = 5;
  c.mode = GameMode::kNormalForm;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch = 4;
  tc.seed = 13;
  auto a = Transformer::initialized(c, 1);
  auto b = Transformer::initialized(c, 1);
  train_on_sequences(a, seqs, tc);
  train_on_sequences(b, seqs, tc);
  ASSERT_EQ(a.params().size(), b.params().size());
  EXPECT_EQ(std::memcmp(a.params().data(), b.params().data(), a.params().size() * sizeof(float)), 0);
  tc.seed = 14;
  auto other = Transformer::initialized(c, 1);
  train_on_sequences(other, seqs, tc);
  EXPECT_NE(std::memcmp(a.params().data(), other.params().data(), a.params().size() * sizeof(float)), 0);
}

TEST(Training, RejectsMismatchedLayout) {
  auto model = Transformer::initialized(tiny_config(0.0), 1);
  TokenSequence efg{GameMode::kExtensiveForm, 3, std::vector<int>(6, 0)};
  EXPECT_THROW(train_on_sequences(model, std::vector<TokenSequence>{efg}, TrainConfig{}), InvalidArgument);
}

TEST(Training, FirstTokenPriorIsSmoothedFrequency) {
  std::vector<TokenSequence> seqs(3, TokenSequence{GameMode::kNormalForm, 3, {2, 0, 0, 0}});
  seqs[2].tokens[0] = 4;
  const auto prior = first_token_prior(seqs, 5);
  ASSERT_EQ(prior.size(), 5u);
  EXPECT_FLOAT_EQ(prior[2], 3.0f / 8.0f);
  EXPECT_FLOAT_EQ(prior[4], 2.0f / 8.0f);
  EXPECT_FLOAT_EQ(prior[0], 1.0f / 8.0f);
}

TrainedModel small_trained(std::uint64_t seed) {
  ModelConfig c = tiny_config(0.1);
  c.q = 20;
  c.context_epochs = 4;
  TrainedModel t;
  t.model = Transformer::initialized(c, seed);
  t.quantization = QuantizationSpec{20, 5000, 0.5, 2.5};
  t.first_token_prior.assign(20, 0.05f);
  t.first_token_prior[3] = 0.1f;
  t.first_token_prior[4] = 0.0f;
  return t;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto t = small_trained(3);
  const auto path = temp_path("model.ckpt");
  save_checkpoint(t, path);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.model.config(), t.model.config());
  EXPECT_EQ(back.model.params(), t.model.params());
  EXPECT_EQ(back.quantization, t.quantization);
  EXPECT_EQ(back.solvers, t.solvers);
  EXPECT_EQ(back.first_token_prior, t.first_token_prior);
  Rng rng(1);
  std::vector<int> tokens;
  for (int i = 0; i < 16; ++i) tokens.push_back(static_cast<int>(rng.below(20)));
  EXPECT_TRUE(back.model.log_probs(tokens) == t.model.log_probs(tokens));
  std::filesystem::remove(path);
}

TEST(Checkpoint, TruncatedFileIsLoadError) {
  const auto path = temp_path("model.ckpt");
  save_checkpoint(small_trained(4), path);
  const auto full = std::filesystem::file_size(path);
  for (auto keep : {std::uintmax_t{0}, std::uintmax_t{5}, full / 2, full - 1}) {
    std::filesystem::resize_file(path, keep);
    EXPECT_THROW(load_checkpoint(path), LoadError) << keep;
    save_checkpoint(small_trained(4), path);
  }
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out.put('x');
  }
  EXPECT_THROW(load_checkpoint(path), LoadError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), LoadError);
}

TEST(Checkpoint, QuantizationMismatchIsRejected) {
  auto t = small_trained(5);
  const auto path = temp_path("model.ckpt");
  save_checkpoint(t, path);
  // Header: 8-byte magic, u32 version, seven u32 config fields, f64 dropout,
  // then the quantization's u32 Q.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8 + 4 + 7 * 4 + 8);
    const std::uint32_t other_q = 10;
    f.write(reinterpret_cast<const char*>(&other_q), sizeof(other_q));
  }
  EXPECT_THROW(load_checkpoint(path), LoadError);
  std::filesystem::remove(path);
  t.quantization.q = 10;
  EXPECT_THROW(save_checkpoint(t, path), InvalidArgument);
}

TEST(Checkpoint, BadMagic) {
  const auto path = temp_path("junk.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "definitely not a model";
  }
  EXPECT_THROW(load_checkpoint(path), LoadError);
  std::filesystem::remove(path);
}

TEST(Train, ModeMismatchRejected) {
  std::vector<RunTrace> runs;
  RunConfig rc;
  rc.solver.prd.steps = 200;
  auto sel = preset_variant("psro_u");
  runs.push_back(run_spsro(generate_nfg(4, 4, 1), *sel, 3, rc, 1));
  const auto d = make_dataset(runs, GameMode::kNormalForm, SolverSet{}, 3, 20, 5000);
  ModelConfig c;
  c.mode = GameMode::kExtensiveForm;
  EXPECT_THROW(train(d, c, TrainConfig{}), InvalidArgument);
}

}  // namespace
