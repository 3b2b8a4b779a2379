#pragma once

// Offline dataset of run traces, stored as JSON lines: a header line with the
// quantization spec, then one run per line.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "spsro/engine.hpp"
#include "spsro/tokenizer.hpp"

namespace spsro {

inline constexpr int kDatasetSchema = 1;

struct Dataset {
  GameMode mode = GameMode::kExtensiveForm;
  SolverSet solvers;
  std::size_t context_epochs = 50;
  QuantizationSpec quantization;
  std::vector<RunTrace> runs;

  bool operator==(const Dataset&) const = default;
};

/// Builds a dataset whose y range is [min, max] over every epoch of every
/// run. When all y values coincide the range is widened by 0.5 on each side.
/// Throws InvalidArgument if runs disagree on mode, exceed context_epochs,
/// are flagged invalid or carry the wrong number of weights.
Dataset make_dataset(std::vector<RunTrace> runs, GameMode mode, const SolverSet& solvers,
                     std::size_t context_epochs, int q, int k_bar);

void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Throws ParseError (with the 1-based line number) on malformed lines or a
/// schema mismatch, and InvalidArgument when `expected_mode` is given and
/// differs from the file's mode.
Dataset read_dataset(std::istream& in, std::optional<GameMode> expected_mode = std::nullopt);
Dataset read_dataset(const std::filesystem::path& path, std::optional<GameMode> expected_mode = std::nullopt);

/// Token sequences of every run in the dataset.
std::vector<TokenSequence> encode_dataset(const Dataset& dataset);

}  // namespace spsro
