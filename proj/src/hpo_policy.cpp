#include "spsro/hpo_policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spsro/errors.hpp"

namespace spsro {

void SamplingConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidArgument("temperature must be positive");
}

std::vector<double> next_token_probs(const TrainedModel& model, std::span<const int> context) {
  const int q = model.model.config().q;
  if (context.empty()) {
    if (model.first_token_prior.size() != static_cast<std::size_t>(q)) {
      throw InvalidArgument("model has no first-token prior");
    }
    return {model.first_token_prior.begin(), model.first_token_prior.end()};
  }
  const auto logp = model.model.log_probs(context);
  const auto last = logp.rows() - 1;
  std::vector<double> probs(static_cast<std::size_t>(q));
  for (int k = 0; k < q; ++k) probs[static_cast<std::size_t>(k)] = std::exp(static_cast<double>(logp(last, k)));
  return probs;
}

FieldDensity token_density(const TrainedModel& model, std::span<const int> context, Field field) {
  FieldDensity out{model.quantization.range(field), next_token_probs(model, context)};
  // K's range is empty when k_bar == 1; tokenize() treats it as unit width.
  if (out.range.max <= out.range.min) out.range.max = out.range.min + 1.0;
  double total = 0.0;
  for (double p : out.density) total += p;
  const double scale = static_cast<double>(out.density.size()) / (out.range.max - out.range.min) / total;
  for (double& p : out.density) p *= scale;
  return out;
}

TransformerSelector::TransformerSelector(std::shared_ptr<const TrainedModel> model, SamplingConfig sampling,
                                         std::uint64_t seed, std::string name)
    : model_(std::move(model)), sampling_(sampling), rng_(seed), name_(std::move(name)) {
  if (!model_) throw InvalidArgument("transformer selector needs a model");
  sampling_.validate();
  const ModelConfig& config = model_->model.config();
  if (model_->quantization.q != config.q) {
    throw InvalidArgument("quantization level " + std::to_string(model_->quantization.q) +
                          " does not match the model's Q of " + std::to_string(config.q));
  }
  if (model_->solvers.size() != static_cast<std::size_t>(config.num_solvers)) {
    throw InvalidArgument("solver list does not match the model's solver slots");
  }
}

SampledEpoch TransformerSelector::sample(const RunTrace& trace) {
  const ModelConfig& config = model_->model.config();
  const QuantizationSpec& spec = model_->quantization;
  const auto m = static_cast<std::size_t>(config.num_solvers);
  if (trace.mode != config.mode) {
    throw InvalidArgument("run mode " + std::string(to_string(trace.mode)) + " does not match model mode " +
                          std::string(to_string(config.mode)));
  }
  if (trace.size() >= static_cast<std::size_t>(config.context_epochs)) {
    throw CapacityError("run already holds " + std::to_string(trace.size()) + " epochs, the model's context");
  }
  std::vector<int> context = encode_trace(trace, spec, m, static_cast<std::size_t>(config.context_epochs)).tokens;

  SampledEpoch out;
  const std::size_t fields = config.tokens_per_epoch() - 1;  // y is observed, not sampled
  for (std::size_t slot = 0; slot < fields; ++slot) {
    std::vector<double> probs = next_token_probs(*model_, context);
    int token = 0;
    if (sampling_.mode == SamplingMode::kGreedy) {
      token = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
      double total = 0.0;
      for (double p : probs) total += p;
      for (double& p : probs) p /= total;
    } else {
      double total = 0.0;
      for (double& p : probs) {
        p = sampling_.temperature == 1.0 ? p : std::pow(p, 1.0 / sampling_.temperature);
        total += p;
      }
      for (double& p : probs) p /= total;
      double u = rng_.uniform();
      token = static_cast<int>(probs.size()) - 1;
      for (std::size_t k = 0; k < probs.size(); ++k) {
        if (u < probs[k]) {
          token = static_cast<int>(k);
          break;
        }
        u -= probs[k];
      }
    }
    out.tokens.push_back(token);
    out.token_probs.push_back(probs[static_cast<std::size_t>(token)]);
    out.joint_probability *= probs[static_cast<std::size_t>(token)];
    context.push_back(token);
  }

  std::vector<double> alpha;
  for (std::size_t b = 0; b < m; ++b) alpha.push_back(detokenize(out.tokens[b], Field::kAlpha, spec));
  const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  for (double& a : alpha) a /= total;
  OracleParams oracle{0.0, spec.k_bar, spec.k_bar};
  if (config.mode == GameMode::kExtensiveForm) {
    oracle.beta = detokenize(out.tokens[m], Field::kBeta, spec);
    const double k = detokenize(out.tokens[m + 1], Field::kK, spec);
    oracle.k = std::clamp(static_cast<int>(std::lround(k)), 1, spec.k_bar);
  }
  out.selection = HyperparamSelection{SolverWeights(std::move(alpha)), oracle};
  return out;
}

HyperparamSelection TransformerSelector::next(const RunTrace& trace) {
  last_ = sample(trace);
  return last_->selection;
}

}  // namespace spsro
