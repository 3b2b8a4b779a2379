#pragma once

// Quantization of run traces into token sequences and back.
//
// Per epoch the fields are laid out as alpha_1..alpha_m, beta, K, y in
// extensive-form mode and alpha_1..alpha_m, y in normal-form mode.

#include <cstddef>
#include <vector>

#include "spsro/engine.hpp"

namespace spsro {

enum class Field { kAlpha, kBeta, kK, kY };

struct FieldRange {
  double min = 0.0;
  double max = 1.0;
};

/// q bins per field. alpha and beta span [0, 1], K spans [1, k_bar], y spans
/// the range observed in the training dataset.
struct QuantizationSpec {
  int q = 20;
  int k_bar = 5000;
  double y_min = 0.0;
  double y_max = 1.0;

  FieldRange range(Field field) const;
  /// Throws InvalidArgument unless q >= 2, k_bar >= 1 and y_max > y_min.
  /// With k_bar == 1 the K range is treated as [1, 2].
  void validate() const;
  bool operator==(const QuantizationSpec&) const = default;
};

/// floor((x - min) / (max - min) * q) after clamping x into [min, max]; the
/// x == max edge maps to q - 1.
int tokenize(double x, Field field, const QuantizationSpec& spec);

/// Bin center min + (token + 0.5) / q * (max - min).
double detokenize(int token, Field field, const QuantizationSpec& spec);

std::size_t tokens_per_epoch(GameMode mode, std::size_t num_solvers);

/// Field kind of slot `slot` (0-based) within one epoch's tokens.
Field field_of_slot(GameMode mode, std::size_t num_solvers, std::size_t slot);

struct TokenSequence {
  GameMode mode = GameMode::kExtensiveForm;
  std::size_t num_solvers = 3;
  std::vector<int> tokens;

  std::size_t per_epoch() const { return tokens_per_epoch(mode, num_solvers); }
  std::size_t epochs() const { return tokens.size() / per_epoch(); }
  /// 0-based epoch index of position `pos`.
  std::size_t epoch_of(std::size_t pos) const { return pos / per_epoch(); }
  std::size_t slot_of(std::size_t pos) const { return pos % per_epoch(); }
  bool operator==(const TokenSequence&) const = default;
};

/// Throws InvalidArgument when the trace is longer than max_epochs or its
/// weights do not have num_solvers entries.
TokenSequence encode_trace(const RunTrace& trace, const QuantizationSpec& spec, std::size_t num_solvers,
                           std::size_t max_epochs);

/// Bin-center values of one epoch. alpha is not renormalized.
struct DecodedEpoch {
  std::vector<double> alpha;
  double beta = 0.0;
  double k = 0.0;
  double y = 0.0;
};

/// Inverse of encode_trace up to quantization. Normal-form epochs report
/// beta = 0 and k = k_bar.
std::vector<DecodedEpoch> decode_tokens(const TokenSequence& sequence, const QuantizationSpec& spec);

}  // namespace spsro
