#include "gam/features.hpp"

#include <cmath>
#include <cstring>

#include "gam/pe.hpp"

namespace gam {

namespace {

bool is_printable(std::uint8_t b) { return b >= 0x20 && b <= 0x7E; }

std::size_t count_occurrences(ByteView haystack, const char* needle) {
  const std::size_t m = std::strlen(needle);
  if (haystack.size() < m) return 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + m <= haystack.size(); ++i)
    if (std::memcmp(haystack.data() + i, needle, m) == 0) ++count;
  return count;
}

void add_section_channel(std::array<double, kSectionHashWidth>& hist, const char* prefix,
                         const std::array<std::uint8_t, 8>& name, double value) {
  Bytes key(prefix, prefix + std::strlen(prefix));
  key.insert(key.end(), name.begin(), name.end());
  hist[section_hash_bucket(key)] += value;
}

}  // namespace

std::uint32_t fnv1a32(ByteView data) {
  std::uint32_t h = 2166136261u;
  for (std::uint8_t b : data) {
    h ^= b;
    h *= 16777619u;
  }
  return h;
}

std::uint32_t section_hash_bucket(ByteView key) {
  const std::uint32_t h = fnv1a32(key);
  return (h ^ (h >> 16)) % kSectionHashWidth;
}

double window_entropy(ByteView window) {
  if (window.empty()) return 0.0;
  std::array<std::uint64_t, 256> counts{};
  for (std::uint8_t b : window) ++counts[b];
  const double n = static_cast<double>(window.size());
  double entropy = 0.0;
  for (std::uint64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log2(p);
  }
  return entropy;
}

FeatureVector extract_features(ByteView bytes) {
  if (bytes.empty()) throw EmptyInput();
  FeatureVector fv;

  for (std::uint8_t b : bytes) fv.byte_histogram[b] += 1.0;
  for (auto& v : fv.byte_histogram) v /= static_cast<double>(bytes.size());

  // Byte-entropy grid over sliding windows.
  std::size_t window_count = 0;
  auto add_window = [&fv, &window_count](ByteView window) {
    const double entropy = window_entropy(window);
    const auto row = std::min<std::size_t>(15, static_cast<std::size_t>(entropy * 2.0));
    const double unit = 1.0 / static_cast<double>(window.size());
    for (std::uint8_t b : window) fv.byte_entropy_histogram[row * 16 + (b >> 4)] += unit;
    ++window_count;
  };
  if (bytes.size() <= kEntropyWindow) {
    add_window(bytes);
  } else {
    for (std::size_t off = 0; off + kEntropyWindow <= bytes.size(); off += kEntropyStep)
      add_window(bytes.subspan(off, kEntropyWindow));
  }
  for (auto& v : fv.byte_entropy_histogram) v /= static_cast<double>(window_count);

  // Printable runs and special markers.
  std::size_t run = 0, run_count = 0, run_total = 0;
  auto flush_run = [&] {
    if (run >= 5) {
      ++run_count;
      run_total += run;
    }
    run = 0;
  };
  for (std::uint8_t b : bytes) {
    if (is_printable(b))
      ++run;
    else
      flush_run();
  }
  flush_run();
  fv.string_features[0] = static_cast<double>(run_count);
  fv.string_features[1] =
      run_count == 0 ? 0.0 : static_cast<double>(run_total) / static_cast<double>(run_count);
  fv.string_features[2] = static_cast<double>(count_occurrences(bytes, "C:\\"));
  fv.string_features[3] = static_cast<double>(count_occurrences(bytes, "HKEY"));
  fv.string_features[4] = static_cast<double>(count_occurrences(bytes, "http"));
  fv.string_features[5] = static_cast<double>(count_occurrences(bytes, "https"));

  fv.general_info[0] = static_cast<double>(bytes.size());

  // Structural blocks only apply to inputs that parse as PE.
  try {
    const pe::PeFile file = pe::parse(bytes);
    for (std::size_t i = 0; i < file.section_headers.size(); ++i) {
      const auto& h = file.section_headers[i];
      const auto name = h.name_bytes();
      add_section_channel(fv.section_features, "cnt|", name, 1.0);
      add_section_channel(fv.section_features, "sz|", name,
                          static_cast<double>(file.section_data[i].size()));
      add_section_channel(fv.section_features, "ent|", name,
                          window_entropy(file.section_data[i]));
      add_section_channel(fv.section_features, "vsz|", name,
                          static_cast<double>(h.virtual_size()));
    }
    fv.general_info[1] = static_cast<double>(file.section_headers.size());
    fv.general_info[2] = static_cast<double>(file.overlay.size());
  } catch (const pe::ParseError&) {
    // Not a PE: section block stays zero, general info keeps only the size.
  }
  return fv;
}

std::vector<double> FeatureVector::to_dense() const {
  std::vector<double> dense;
  dense.reserve(kWidth);
  dense.insert(dense.end(), byte_histogram.begin(), byte_histogram.end());
  dense.insert(dense.end(), byte_entropy_histogram.begin(), byte_entropy_histogram.end());
  for (double v : string_features) dense.push_back(std::log1p(v));
  for (double v : section_features) dense.push_back(std::log1p(v));
  for (double v : general_info) dense.push_back(std::log1p(v));
  return dense;
}

}  // namespace gam
