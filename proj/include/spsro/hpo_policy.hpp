#pragma once

// A trained transformer used as a selector: each epoch's hyperparameters are
// sampled field by field, every sampled token fed back as context for the
// next one.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spsro/rng.hpp"
#include "spsro/transformer.hpp"

namespace spsro {

enum class SamplingMode { kGreedy, kCategorical };

struct SamplingConfig {
  SamplingMode mode = SamplingMode::kCategorical;
  double temperature = 1.0;

  void validate() const;
};

/// Distribution of the next token given `context`. An empty context gets the
/// checkpoint's first-token prior.
std::vector<double> next_token_probs(const TrainedModel& model, std::span<const int> context);

/// Piecewise-constant density of the next value of `field` over the field's
/// range: bin probability * Q / (max - min), one entry per bin.
struct FieldDensity {
  FieldRange range;
  std::vector<double> density;
};
FieldDensity token_density(const TrainedModel& model, std::span<const int> context, Field field);

/// What one call to next() drew, for inspection and tests.
struct SampledEpoch {
  HyperparamSelection selection;
  std::vector<int> tokens;          // sampled fields, in layout order, y excluded
  std::vector<double> token_probs;  // probability of each sampled token under the sampling distribution
  double joint_probability = 1.0;   // product of token_probs
};

class TransformerSelector final : public SelectorPolicy {
 public:
  TransformerSelector(std::shared_ptr<const TrainedModel> model, SamplingConfig sampling, std::uint64_t seed,
                      std::string name = "transformer");

  /// Throws CapacityError when the trace already fills the context and
  /// InvalidArgument when the trace's mode differs from the model's.
  HyperparamSelection next(const RunTrace& trace) override;
  std::optional<SolverSet> solver_override() const override { return model_->solvers; }
  std::string name() const override { return name_; }

  SampledEpoch sample(const RunTrace& trace);
  const std::optional<SampledEpoch>& last_sample() const { return last_; }

 private:
  std::shared_ptr<const TrainedModel> model_;
  SamplingConfig sampling_;
  Rng rng_;
  std::string name_;
  std::optional<SampledEpoch> last_;
};

}  // namespace spsro
