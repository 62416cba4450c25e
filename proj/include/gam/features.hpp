#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gam/bytes.hpp"

namespace gam {

class EmptyInput : public std::invalid_argument {
 public:
  EmptyInput() : std::invalid_argument("cannot extract features from empty input") {}
};

/// Byte-entropy histogram parameters: sliding window of kEntropyWindow bytes
/// advanced by kEntropyStep; inputs shorter than one window form a single
/// window over the whole buffer.
inline constexpr std::size_t kEntropyWindow = 2048;
inline constexpr std::size_t kEntropyStep = 1024;

/// Width of the hashed section-feature histogram.
inline constexpr std::size_t kSectionHashWidth = 64;

/// Static feature blocks extracted from raw executable bytes. Field values
/// are raw (counts, sums, sizes); to_dense() applies the documented scaling
/// used as model input.
struct FeatureVector {
  /// Occurrences of each byte value divided by the total byte count.
  std::array<double, 256> byte_histogram{};

  /// 16x16 grid, row = window entropy quantized in 0.5-bit steps (capped at
  /// row 15), column = byte value >> 4. Each window contributes its in-window
  /// byte-bucket frequencies; the grid is divided by the window count, so it
  /// sums to 1 for nonempty input.
  std::array<double, 256> byte_entropy_histogram{};

  /// {run count, mean run length, "C:\" count, "HKEY" count, "http" count,
  /// "https" count}. Runs are >=5 consecutive printable bytes (0x20..0x7E);
  /// marker counts are independent substring counts over the raw bytes, so
  /// every "https" also counts as an "http".
  std::array<double, 6> string_features{};

  /// Hashed per-section channels. For each section, four keys
  /// "cnt|<name>", "sz|<name>", "ent|<name>", "vsz|<name>" (name = raw
  /// 8-byte field) are reduced to a bucket by section_hash_bucket(); the
  /// bucket accumulates 1, raw data size, content entropy in bits, and
  /// virtual size respectively. All-zero when the input is not a PE.
  std::array<double, kSectionHashWidth> section_features{};

  /// {file size, section count, overlay size}; the latter two are zero when
  /// the input is not a PE.
  std::array<double, 3> general_info{};

  static constexpr std::size_t kWidth = 256 + 256 + 6 + kSectionHashWidth + 3;

  /// Model-input projection: histograms kept as-is, every coordinate of the
  /// unbounded blocks (strings, sections, general info) passed through
  /// log1p. Strictly monotone per coordinate.
  std::vector<double> to_dense() const;
};

/// 32-bit FNV-1a over `data` (offset basis 2166136261, prime 16777619).
std::uint32_t fnv1a32(ByteView data);

/// Bucket reduction used by the section histogram: h = fnv1a32(key),
/// bucket = (h ^ (h >> 16)) % kSectionHashWidth.
std::uint32_t section_hash_bucket(ByteView key);

/// Shannon entropy of the byte distribution of `window`, in bits (0..8).
double window_entropy(ByteView window);

/// Deterministic, total on nonempty input; throws EmptyInput otherwise.
/// Inputs that fail PE parsing still produce the byte-level blocks.
FeatureVector extract_features(ByteView bytes);

}  // namespace gam
