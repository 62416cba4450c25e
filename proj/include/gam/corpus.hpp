#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gam/bytes.hpp"

namespace gam {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PayloadSection {
  std::string source_name;  // 8-byte section name, trimmed
  Bytes content;
};

/// The attack space: k benign sections whose byte lengths form the size
/// vector weighting the payload penalty. Order is fixed once persisted;
/// manipulation vectors index into it.
struct PayloadCorpus {
  std::vector<PayloadSection> sections;

  std::size_t size() const { return sections.size(); }
  std::vector<std::uint64_t> sizes() const;
  std::uint64_t total_bytes() const;
};

struct HarvestOptions {
  std::string name_filter = ".rdata";
  std::size_t max_sections = 75;
  std::uint64_t max_total_bytes = 2'621'440;  // 2.5 MB
  std::uint64_t seed = 0;
};

/// Collects matching sections from every parseable PE under `benign_dir`
/// (non-recursive, filename order), then keeps a seeded uniform shuffle's
/// prefix: up to max_sections entries, stopping as soon as the next pick
/// would exceed max_total_bytes. Zero-length sections are skipped.
PayloadCorpus harvest(const std::filesystem::path& benign_dir, const HarvestOptions& options);

/// Writes manifest.json plus one blob file per section into `dir`.
void save(const PayloadCorpus& corpus, const std::filesystem::path& dir);

/// Inverse of save(); verifies blob sizes against the manifest.
PayloadCorpus load(const std::filesystem::path& dir);

}  // namespace gam
