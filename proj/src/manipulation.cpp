#include "gam/manipulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gam {

namespace {

using pe::align_up;

constexpr std::uint64_t kU32Max = std::numeric_limits<std::uint32_t>::max();

std::uint32_t checked_u32(std::uint64_t v, const char* field) {
  if (v > kU32Max)
    throw pe::LayoutError(std::string("layout overflow: ") + field + " = " + std::to_string(v));
  return static_cast<std::uint32_t>(v);
}

void check_vector(const ManipulationVector& s, const PayloadCorpus& corpus) {
  if (s.size() != corpus.size())
    throw ManipulationError("manipulation vector length " + std::to_string(s.size()) +
                            " does not match corpus size " + std::to_string(corpus.size()));
  for (double v : s.values)
    if (!(v >= 0.0 && v <= 1.0))
      throw ManipulationError("manipulation element " + std::to_string(v) + " outside [0,1]");
}

std::uint64_t payload_bytes(double fraction, std::uint64_t section_size) {
  return static_cast<std::uint64_t>(std::floor(fraction * static_cast<double>(section_size)));
}

// Source name with a one-digit ordinal suffix, truncated to the 8-byte field.
std::string injected_name(const std::string& source, std::size_t ordinal) {
  std::string name = source.substr(0, 7);
  name.push_back(static_cast<char>('0' + ordinal % 10));
  return name;
}

}  // namespace

const char* injection_mode_name(InjectionMode mode) {
  return mode == InjectionMode::Padding ? "padding" : "section-injection";
}

InjectionMode injection_mode_from_name(const std::string& name) {
  if (name == "padding") return InjectionMode::Padding;
  if (name == "section-injection") return InjectionMode::SectionInjection;
  throw ManipulationError("unknown injection mode: " + name);
}

pe::PeFile apply(const pe::PeFile& x, const ManipulationVector& s, const PayloadCorpus& corpus,
                 InjectionMode mode) {
  check_vector(s, corpus);
  pe::PeFile out = x;

  if (mode == InjectionMode::Padding) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto& content = corpus.sections[i].content;
      const std::uint64_t n = payload_bytes(s.values[i], content.size());
      out.overlay.insert(out.overlay.end(), content.begin(), content.begin() + n);
    }
    return out;
  }

  struct Pick {
    std::size_t index;
    std::uint64_t bytes;
  };
  std::vector<Pick> picks;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::uint64_t n = payload_bytes(s.values[i], corpus.sections[i].content.size());
    if (n > 0) picks.push_back({i, n});
  }
  if (picks.empty()) return out;

  const std::uint64_t file_align = out.optional.file_alignment();
  const std::uint64_t sect_align = out.optional.section_alignment();
  const std::size_t old_count = out.section_headers.size();
  const std::uint64_t new_count = old_count + picks.size();
  if (new_count > 0xFFFF) throw pe::LayoutError("layout overflow: section count exceeds 65535");

  // Grow the header region if the enlarged table no longer fits; all raw
  // pointers shift together so section contents stay byte-identical.
  const std::uint64_t table_off = out.table_offset();
  const std::uint64_t old_table_end = table_off + old_count * pe::kSectionHeaderSize;
  const std::uint64_t new_table_end = table_off + new_count * pe::kSectionHeaderSize;
  const std::uint64_t old_headers = out.optional.size_of_headers();
  const std::uint64_t new_headers = std::max(old_headers, align_up(new_table_end, file_align));
  const std::uint64_t shift = new_headers - old_headers;
  if (shift > 0) {
    for (auto& h : out.section_headers)
      if (h.raw_size() > 0)
        h.set_raw_pointer(checked_u32(h.raw_pointer() + shift, "raw pointer"));
    for (auto& g : out.gaps) g.offset += shift;
  }

  // The new table entries consume the front of the old padding; the padding
  // region keeps its remaining bytes and is zero-extended to the new end.
  Bytes padding;
  const std::uint64_t consumed = new_table_end - old_table_end;
  if (consumed < out.header_padding.size())
    padding.assign(out.header_padding.begin() + consumed, out.header_padding.end());
  padding.resize(new_headers > new_table_end ? new_headers - new_table_end : 0, 0);
  out.header_padding = std::move(padding);

  std::uint64_t raw_cursor = new_headers;
  for (std::size_t i = 0; i < old_count; ++i)
    if (out.section_headers[i].raw_size() > 0)
      raw_cursor = std::max(raw_cursor, std::uint64_t{out.section_headers[i].raw_pointer()} +
                                            out.section_headers[i].raw_size());
  std::uint64_t image_end = align_up(out.optional.size_of_image(), sect_align);

  for (std::size_t ordinal = 0; ordinal < picks.size(); ++ordinal) {
    const auto& pick = picks[ordinal];
    const auto& source = corpus.sections[pick.index];
    const std::uint64_t raw_size = align_up(pick.bytes, file_align);

    Bytes data(source.content.begin(), source.content.begin() + pick.bytes);
    data.resize(raw_size, 0);

    pe::SectionHeader h;
    h.set_name(injected_name(source.source_name, ordinal));
    h.set_virtual_size(checked_u32(pick.bytes, "virtual size"));
    h.set_virtual_address(checked_u32(image_end, "virtual address"));
    h.set_raw_size(checked_u32(raw_size, "raw size"));
    h.set_raw_pointer(checked_u32(raw_cursor, "raw pointer"));
    h.set_characteristics(pe::kScnInitializedData | pe::kScnMemRead);
    out.section_headers.push_back(h);
    out.section_data.push_back(std::move(data));

    image_end = align_up(image_end + pick.bytes, sect_align);
    raw_cursor += raw_size;
    checked_u32(raw_cursor, "raw data end");
  }

  out.coff.set_section_count(static_cast<std::uint16_t>(new_count));
  out.optional.set_size_of_headers(checked_u32(new_headers, "size_of_headers"));
  out.optional.set_size_of_image(checked_u32(image_end, "size_of_image"));
  return out;
}

double penalty(const ManipulationVector& s, const PayloadCorpus& corpus) {
  check_vector(s, corpus);
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    sum += static_cast<double>(corpus.sections[i].content.size()) * s.values[i];
  return sum;
}

std::uint64_t injected_size(const pe::PeFile& x, const pe::PeFile& x_prime) {
  return pe::serialize(x_prime).size() - pe::serialize(x).size();
}

}  // namespace gam
