#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gam/pe.hpp"

namespace gam {

enum class FixtureClass { BenignLike, MalwareLike };

struct SectionPlan {
  std::string name;
  std::uint32_t base_size = 0;  // content size is jittered per file in (3/4, 1] of this
  std::uint32_t characteristics = 0;
};

/// Recipe for a family of synthetic PE files with class-distinct byte
/// statistics. Benign-like files skew toward zeros and printable text and
/// carry an .rdata section full of string constants; malware-like files get
/// near-uniform (packed-looking) content and fewer sections.
struct FixtureProfile {
  FixtureClass cls = FixtureClass::BenignLike;
  std::array<double, 256> byte_distribution{};  // sampling weights, sum 1
  std::vector<SectionPlan> section_plan;
  std::uint64_t seed = 0;

  static FixtureProfile benign_like(std::uint64_t seed);
  static FixtureProfile malware_like(std::uint64_t seed);
};

/// Deterministic in-memory fixture; `index` selects the file within the
/// profile's family.
pe::PeFile make_fixture(const FixtureProfile& profile, std::uint64_t index);

/// Writes `count` fixtures into `out_dir` and returns their paths. Repeated
/// calls with the same arguments produce byte-identical files.
std::vector<std::filesystem::path> generate_fixtures(const FixtureProfile& profile, int count,
                                                     const std::filesystem::path& out_dir);

}  // namespace gam
