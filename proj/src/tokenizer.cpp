#include "spsro/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spsro/errors.hpp"

namespace spsro {

FieldRange QuantizationSpec::range(Field field) const {
  switch (field) {
    case Field::kAlpha:
    case Field::kBeta: return {0.0, 1.0};
    case Field::kK: return {1.0, static_cast<double>(k_bar)};
    case Field::kY: return {y_min, y_max};
  }
  return {0.0, 1.0};
}

void QuantizationSpec::validate() const {
  if (q < 2) throw InvalidArgument("quantization level must be at least 2");
  if (k_bar < 1) throw InvalidArgument("k_bar must be at least 1");
  if (!(std::isfinite(y_min) && std::isfinite(y_max) && y_max > y_min)) {
    throw InvalidArgument("y range must be finite with max > min");
  }
}

namespace {

// k_bar == 1 leaves K's range empty; give it unit width so K = 1 maps to bin 0.
FieldRange effective_range(Field field, const QuantizationSpec& spec) {
  FieldRange r = spec.range(field);
  if (field == Field::kK && r.max <= r.min) r.max = r.min + 1.0;
  return r;
}

}  // namespace

int tokenize(double x, Field field, const QuantizationSpec& spec) {
  const FieldRange r = effective_range(field, spec);
  if (std::isnan(x)) throw InvalidArgument("tokenize: NaN value");
  const double clamped = std::clamp(x, r.min, r.max);
  const auto token = static_cast<int>(std::floor((clamped - r.min) / (r.max - r.min) * spec.q));
  return std::min(token, spec.q - 1);
}

double detokenize(int token, Field field, const QuantizationSpec& spec) {
  if (token < 0 || token >= spec.q) {
    throw InvalidArgument("detokenize: token " + std::to_string(token) + " outside [0, " +
                          std::to_string(spec.q - 1) + "]");
  }
  const FieldRange r = effective_range(field, spec);
  return r.min + (token + 0.5) / spec.q * (r.max - r.min);
}

std::size_t tokens_per_epoch(GameMode mode, std::size_t num_solvers) {
  return num_solvers + (mode == GameMode::kExtensiveForm ? 3 : 1);
}

Field field_of_slot(GameMode mode, std::size_t num_solvers, std::size_t slot) {
  if (slot < num_solvers) return Field::kAlpha;
  if (mode == GameMode::kExtensiveForm) {
    if (slot == num_solvers) return Field::kBeta;
    if (slot == num_solvers + 1) return Field::kK;
    if (slot == num_solvers + 2) return Field::kY;
  } else if (slot == num_solvers) {
    return Field::kY;
  }
  throw InvalidArgument("field_of_slot: slot " + std::to_string(slot) + " out of range");
}

TokenSequence encode_trace(const RunTrace& trace, const QuantizationSpec& spec, std::size_t num_solvers,
                           std::size_t max_epochs) {
  if (trace.size() > max_epochs) {
    throw InvalidArgument("encode_trace: trace has " + std::to_string(trace.size()) + " epochs, capacity is " +
                          std::to_string(max_epochs));
  }
  TokenSequence out{trace.mode, num_solvers, {}};
  out.tokens.reserve(trace.size() * out.per_epoch());
  for (const auto& record : trace.epochs) {
    const auto& u = record.selection;
    if (u.weights.size() != num_solvers) {
      throw InvalidArgument("encode_trace: epoch has " + std::to_string(u.weights.size()) + " weights, expected " +
                            std::to_string(num_solvers));
    }
    for (std::size_t b = 0; b < num_solvers; ++b) out.tokens.push_back(tokenize(u.weights[b], Field::kAlpha, spec));
    if (trace.mode == GameMode::kExtensiveForm) {
      out.tokens.push_back(tokenize(u.oracle.beta, Field::kBeta, spec));
      out.tokens.push_back(tokenize(u.oracle.k, Field::kK, spec));
    }
    out.tokens.push_back(tokenize(record.metrics.y, Field::kY, spec));
  }
  return out;
}

std::vector<DecodedEpoch> decode_tokens(const TokenSequence& sequence, const QuantizationSpec& spec) {
  const std::size_t per = sequence.per_epoch();
  if (sequence.tokens.size() % per != 0) throw InvalidArgument("decode_tokens: partial epoch in sequence");
  std::vector<DecodedEpoch> out;
  for (std::size_t start = 0; start < sequence.tokens.size(); start += per) {
    DecodedEpoch epoch;
    epoch.k = spec.k_bar;
    for (std::size_t slot = 0; slot < per; ++slot) {
      const int token = sequence.tokens[start + slot];
      switch (field_of_slot(sequence.mode, sequence.num_solvers, slot)) {
        case Field::kAlpha: epoch.alpha.push_back(detokenize(token, Field::kAlpha, spec)); break;
        case Field::kBeta: epoch.beta = detokenize(token, Field::kBeta, spec); break;
        case Field::kK: epoch.k = detokenize(token, Field::kK, spec); break;
        case Field::kY: epoch.y = detokenize(token, Field::kY, spec); break;
      }
    }
    out.push_back(std::move(epoch));
  }
  return out;
}

}  // namespace spsro
