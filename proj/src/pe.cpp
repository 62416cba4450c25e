#include "gam/pe.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

namespace gam::pe {

namespace {

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

ParseError::ParseError(ParseErrc code, std::uint64_t offset, const std::string& what)
    : std::runtime_error(what + " (at offset " + hex(offset) + ")"),
      code_(code),
      offset_(offset) {}

std::uint64_t align_up(std::uint64_t value, std::uint64_t alignment) {
  if (alignment == 0) throw ZeroAlignment();
  const std::uint64_t rem = value % alignment;
  if (rem == 0) return value;
  const std::uint64_t pad = alignment - rem;
  if (value > std::numeric_limits<std::uint64_t>::max() - pad)
    throw LayoutError("align_up overflow");
  return value + pad;
}

std::size_t OptionalHeader::min_size(std::uint16_t magic) {
  return magic == kMagicPe32Plus ? 112 : 96;
}

std::uint32_t OptionalHeader::data_directory_count() const {
  const std::size_t off = is_pe32_plus() ? 108 : 92;
  if (raw.size() < off + 4) return 0;
  return read_u32(raw, off);
}

std::pair<std::uint32_t, std::uint32_t> OptionalHeader::data_directory(std::uint32_t i) const {
  const std::size_t base = (is_pe32_plus() ? 112 : 96) + std::size_t{i} * 8;
  if (raw.size() < base + 8) return {0, 0};
  return {read_u32(raw, base), read_u32(raw, base + 4)};
}

std::array<std::uint8_t, 8> SectionHeader::name_bytes() const {
  std::array<std::uint8_t, 8> out;
  std::copy_n(raw.begin(), 8, out.begin());
  return out;
}

std::string SectionHeader::name() const {
  std::string s(raw.begin(), raw.begin() + 8);
  const auto nul = s.find('\0');
  if (nul != std::string::npos) s.resize(nul);
  return s;
}

void SectionHeader::set_name(const std::string& n) {
  for (std::size_t i = 0; i < 8; ++i)
    raw[i] = i < n.size() ? static_cast<std::uint8_t>(n[i]) : 0;
}

std::uint64_t PeFile::overlay_offset() const {
  std::uint64_t end = table_end() + header_padding.size();
  for (std::size_t i = 0; i < section_headers.size(); ++i) {
    if (section_data[i].empty()) continue;
    end = std::max(end, std::uint64_t{section_headers[i].raw_pointer()} + section_data[i].size());
  }
  for (const auto& g : gaps) end = std::max(end, g.offset + g.bytes.size());
  return end;
}

PeFile parse(ByteView bytes) {
  const std::uint64_t n = bytes.size();

  if (n < 2) throw ParseError(ParseErrc::TruncatedHeader, 0, "file too small for MZ magic");
  if (bytes[0] != 'M' || bytes[1] != 'Z')
    throw ParseError(ParseErrc::BadMzMagic, 0, "missing MZ magic");
  if (n < kDosHeaderSize)
    throw ParseError(ParseErrc::TruncatedHeader, kPeOffsetField, "file too small for DOS header");

  const std::uint32_t e_lfanew = read_u32(bytes, kPeOffsetField);
  // e_lfanew below 0x40 would overlap the DOS header itself; rejected.
  if (e_lfanew < kDosHeaderSize || e_lfanew >= n)
    throw ParseError(ParseErrc::BadPeOffset, kPeOffsetField,
                     "PE header offset " + hex(e_lfanew) + " out of bounds");
  if (std::uint64_t{e_lfanew} + 4 > n)
    throw ParseError(ParseErrc::TruncatedHeader, e_lfanew, "file too small for PE signature");
  if (bytes[e_lfanew] != 'P' || bytes[e_lfanew + 1] != 'E' || bytes[e_lfanew + 2] != 0 ||
      bytes[e_lfanew + 3] != 0)
    throw ParseError(ParseErrc::BadPeMagic, e_lfanew, "missing PE signature");

  PeFile file;
  std::copy_n(bytes.begin(), 2, file.dos.magic.begin());
  std::copy_n(bytes.begin() + 2, file.dos.reserved.size(), file.dos.reserved.begin());
  file.dos.pe_offset = e_lfanew;
  file.dos.stub.assign(bytes.begin() + kDosHeaderSize, bytes.begin() + e_lfanew);

  const std::uint64_t coff_off = std::uint64_t{e_lfanew} + 4;
  if (coff_off + kCoffHeaderSize > n)
    throw ParseError(ParseErrc::TruncatedHeader, coff_off, "file too small for COFF header");
  std::copy_n(bytes.begin() + coff_off, kCoffHeaderSize, file.coff.raw.begin());

  const std::uint64_t opt_off = coff_off + kCoffHeaderSize;
  const std::uint16_t opt_size = file.coff.optional_header_size();
  if (opt_size < 2 || opt_off + opt_size > n)
    throw ParseError(ParseErrc::TruncatedHeader, opt_off, "optional header exceeds file bounds");
  const std::uint16_t opt_magic = read_u16(bytes, opt_off);
  if (opt_magic != kMagicPe32 && opt_magic != kMagicPe32Plus)
    throw ParseError(ParseErrc::BadPeMagic, opt_off,
                     "unknown optional header magic " + hex(opt_magic));
  if (opt_size < OptionalHeader::min_size(opt_magic))
    throw ParseError(ParseErrc::TruncatedHeader, opt_off, "optional header too small");
  file.optional.raw.assign(bytes.begin() + opt_off, bytes.begin() + opt_off + opt_size);

  const std::uint64_t table_off = opt_off + opt_size;
  const std::uint16_t nsec = file.coff.section_count();
  const std::uint64_t table_end = table_off + std::uint64_t{nsec} * kSectionHeaderSize;
  if (table_end > n)
    throw ParseError(ParseErrc::MalformedSectionTable, table_off,
                     "section table exceeds file bounds");

  file.section_headers.resize(nsec);
  file.section_data.resize(nsec);
  for (std::uint16_t i = 0; i < nsec; ++i) {
    const std::uint64_t entry_off = table_off + std::uint64_t{i} * kSectionHeaderSize;
    std::copy_n(bytes.begin() + entry_off, kSectionHeaderSize,
                file.section_headers[i].raw.begin());
    const auto& h = file.section_headers[i];
    if (h.raw_size() == 0) continue;
    const std::uint64_t start = h.raw_pointer();
    const std::uint64_t end = start + std::uint64_t{h.raw_size()};
    if (end > n || start < table_end)
      throw ParseError(ParseErrc::MalformedSectionTable, entry_off,
                       "section " + std::to_string(i) + " raw data [" + hex(start) + ", " +
                           hex(end) + ") outside usable range");
    file.section_data[i].assign(bytes.begin() + start, bytes.begin() + end);
  }

  // Reject raw ranges that overlap each other; with headers and sections
  // disjoint, every input byte lands in exactly one component and the
  // round-trip identity holds by construction.
  struct Range {
    std::uint64_t start, end, entry_off;
  };
  std::vector<Range> ranges;
  for (std::uint16_t i = 0; i < nsec; ++i) {
    const auto& h = file.section_headers[i];
    if (h.raw_size() == 0) continue;
    ranges.push_back({h.raw_pointer(), h.raw_pointer() + std::uint64_t{h.raw_size()},
                      table_off + std::uint64_t{i} * kSectionHeaderSize});
  }
  std::sort(ranges.begin(), ranges.end(),
            [](const Range& a, const Range& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].start < ranges[i - 1].end)
      throw ParseError(ParseErrc::MalformedSectionTable, ranges[i].entry_off,
                       "section raw ranges overlap");
  }

  const std::uint64_t first_data = ranges.empty() ? n : ranges.front().start;
  std::uint64_t pad_end =
      std::max(table_end, std::min<std::uint64_t>(file.optional.size_of_headers(), n));
  pad_end = std::min(pad_end, first_data);
  file.header_padding.assign(bytes.begin() + table_end, bytes.begin() + pad_end);

  // Slack between consecutive raw ranges (and between the declared header end
  // and the first section) becomes explicit gaps.
  std::uint64_t cursor = pad_end;
  for (const auto& r : ranges) {
    if (r.start > cursor)
      file.gaps.push_back({cursor, Bytes(bytes.begin() + cursor, bytes.begin() + r.start)});
    cursor = std::max(cursor, r.end);
  }

  file.overlay.assign(bytes.begin() + cursor, bytes.end());
  return file;
}

Bytes serialize(const PeFile& file) {
  struct Piece {
    std::uint64_t start, end;
    const char* what;
  };
  std::vector<Piece> pieces;
  const std::uint64_t e_lfanew = file.dos.pe_offset;

  pieces.push_back({0, kDosHeaderSize, "DOS header"});
  if (!file.dos.stub.empty())
    pieces.push_back({kDosHeaderSize, kDosHeaderSize + file.dos.stub.size(), "DOS stub"});
  const std::uint64_t opt_off = e_lfanew + 4 + kCoffHeaderSize;
  pieces.push_back({e_lfanew, opt_off + file.optional.raw.size(), "PE headers"});
  const std::uint64_t table_off = file.table_offset();
  const std::uint64_t table_end = file.table_end();
  if (table_end > table_off) pieces.push_back({table_off, table_end, "section table"});
  if (!file.header_padding.empty())
    pieces.push_back({table_end, table_end + file.header_padding.size(), "header padding"});
  for (std::size_t i = 0; i < file.section_headers.size(); ++i) {
    if (file.section_data[i].empty()) continue;
    const std::uint64_t start = file.section_headers[i].raw_pointer();
    pieces.push_back({start, start + file.section_data[i].size(), "section data"});
  }
  for (const auto& g : file.gaps)
    if (!g.bytes.empty()) pieces.push_back({g.offset, g.offset + g.bytes.size(), "gap"});

  std::sort(pieces.begin(), pieces.end(),
            [](const Piece& a, const Piece& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < pieces.size(); ++i) {
    if (pieces[i].start < pieces[i - 1].end)
      throw LayoutError(std::string("overlapping layout: ") + pieces[i - 1].what + " [" +
                        hex(pieces[i - 1].start) + ", " + hex(pieces[i - 1].end) + ") and " +
                        pieces[i].what + " starting at " + hex(pieces[i].start));
  }

  const std::uint64_t overlay_off = file.overlay_offset();
  Bytes out(overlay_off + file.overlay.size(), 0);
  auto put = [&out](std::uint64_t off, ByteView src) {
    std::copy(src.begin(), src.end(), out.begin() + off);
  };

  std::copy(file.dos.magic.begin(), file.dos.magic.end(), out.begin());
  put(2, file.dos.reserved);
  write_u32(out, kPeOffsetField, file.dos.pe_offset);
  put(kDosHeaderSize, file.dos.stub);
  out[e_lfanew] = 'P';
  out[e_lfanew + 1] = 'E';
  put(e_lfanew + 4, file.coff.raw);
  put(opt_off, file.optional.raw);
  for (std::size_t i = 0; i < file.section_headers.size(); ++i)
    put(table_off + i * kSectionHeaderSize, file.section_headers[i].raw);
  put(table_end, file.header_padding);
  for (std::size_t i = 0; i < file.section_headers.size(); ++i)
    if (!file.section_data[i].empty())
      put(file.section_headers[i].raw_pointer(), file.section_data[i]);
  for (const auto& g : file.gaps) put(g.offset, g.bytes);
  put(overlay_off, file.overlay);
  return out;
}

const char* violation_name(ViolationCode code) {
  switch (code) {
    case ViolationCode::BadDosMagic: return "BadDosMagic";
    case ViolationCode::BadPeOffset: return "BadPeOffset";
    case ViolationCode::BadOptionalMagic: return "BadOptionalMagic";
    case ViolationCode::SectionCountMismatch: return "SectionCountMismatch";
    case ViolationCode::NonPowerOfTwoAlignment: return "NonPowerOfTwoAlignment";
    case ViolationCode::MisalignedImageSize: return "MisalignedImageSize";
    case ViolationCode::MisalignedHeaderSize: return "MisalignedHeaderSize";
    case ViolationCode::MisalignedRawData: return "MisalignedRawData";
    case ViolationCode::OverlappingSections: return "OverlappingSections";
    case ViolationCode::UnsortedSections: return "UnsortedSections";
    case ViolationCode::ImageSizeTooSmall: return "ImageSizeTooSmall";
    case ViolationCode::SectionDataSizeMismatch: return "SectionDataSizeMismatch";
    case ViolationCode::StubSizeMismatch: return "StubSizeMismatch";
    case ViolationCode::StaleChecksum: return "StaleChecksum";
  }
  return "?";
}

std::vector<Violation> validate(const PeFile& file) {
  std::vector<Violation> out;
  auto err = [&out](ViolationCode c, std::string d) {
    out.push_back({c, Severity::Error, std::move(d)});
  };

  if (file.dos.magic[0] != 'M' || file.dos.magic[1] != 'Z')
    err(ViolationCode::BadDosMagic, "DOS magic is not MZ");
  if (file.dos.pe_offset < kDosHeaderSize)
    err(ViolationCode::BadPeOffset, "e_lfanew overlaps the DOS header");
  if (kDosHeaderSize + file.dos.stub.size() != file.dos.pe_offset)
    err(ViolationCode::StubSizeMismatch, "stub length does not reach e_lfanew");
  if (file.coff.section_count() != file.section_headers.size())
    err(ViolationCode::SectionCountMismatch,
        "COFF count " + std::to_string(file.coff.section_count()) + " vs table size " +
            std::to_string(file.section_headers.size()));
  if (file.optional.magic() != kMagicPe32 && file.optional.magic() != kMagicPe32Plus)
    err(ViolationCode::BadOptionalMagic, "unknown optional header magic");

  const std::uint64_t file_align = file.optional.file_alignment();
  const std::uint64_t sect_align = file.optional.section_alignment();
  const bool aligns_ok = is_pow2(file_align) && is_pow2(sect_align);
  if (!aligns_ok)
    err(ViolationCode::NonPowerOfTwoAlignment, "file/section alignment not a power of two");

  if (aligns_ok) {
    if (file.optional.size_of_image() % sect_align != 0)
      err(ViolationCode::MisalignedImageSize, "size_of_image not a multiple of section alignment");
    if (file.optional.size_of_headers() % file_align != 0)
      err(ViolationCode::MisalignedHeaderSize, "size_of_headers not a multiple of file alignment");
  }

  std::uint64_t prev_va = 0;
  std::uint64_t max_virtual_extent = 0;
  struct Range {
    std::uint64_t start, end;
    std::size_t idx;
  };
  std::vector<Range> ranges;
  for (std::size_t i = 0; i < file.section_headers.size(); ++i) {
    const auto& h = file.section_headers[i];
    if (i > 0 && h.virtual_address() < prev_va)
      err(ViolationCode::UnsortedSections, "section " + std::to_string(i) + " virtual address " +
                                               hex(h.virtual_address()) + " below predecessor");
    prev_va = h.virtual_address();
    max_virtual_extent =
        std::max(max_virtual_extent, std::uint64_t{h.virtual_address()} + h.virtual_size());
    if (h.raw_size() != 0) {
      if (aligns_ok &&
          (h.raw_pointer() % file_align != 0 || h.raw_size() % file_align != 0))
        err(ViolationCode::MisalignedRawData,
            "section " + std::to_string(i) + " raw pointer/size not file-aligned");
      ranges.push_back({h.raw_pointer(), h.raw_pointer() + std::uint64_t{h.raw_size()}, i});
    }
    if (i < file.section_data.size() && file.section_data[i].size() != h.raw_size())
      err(ViolationCode::SectionDataSizeMismatch,
          "section " + std::to_string(i) + " holds " + std::to_string(file.section_data[i].size()) +
              " bytes but declares " + std::to_string(h.raw_size()));
  }
  std::sort(ranges.begin(), ranges.end(),
            [](const Range& a, const Range& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < ranges.size(); ++i)
    if (ranges[i].start < ranges[i - 1].end)
      err(ViolationCode::OverlappingSections,
          "sections " + std::to_string(ranges[i - 1].idx) + " and " +
              std::to_string(ranges[i].idx) + " overlap on disk");

  if (max_virtual_extent > file.optional.size_of_image())
    err(ViolationCode::ImageSizeTooSmall,
        "size_of_image " + hex(file.optional.size_of_image()) + " below last section end " +
            hex(max_virtual_extent));

  // A set-but-wrong checksum is only a warning: loaders ignore it for normal
  // executables and this tool never recomputes it after manipulation.
  if (is_clean(out) && file.optional.checksum() != 0) {
    const Bytes image = serialize(file);
    const std::size_t ck_off = static_cast<std::size_t>(file.dos.pe_offset) + 4 +
                               kCoffHeaderSize + 64;
    if (compute_checksum(image, ck_off) != file.optional.checksum())
      out.push_back({ViolationCode::StaleChecksum, Severity::Warning,
                     "header checksum does not match file contents"});
  }
  return out;
}

std::uint32_t compute_checksum(ByteView image, std::size_t checksum_offset) {
  std::uint64_t sum = 0;
  const std::size_t n = image.size();
  for (std::size_t off = 0; off < n; off += 4) {
    if (off == checksum_offset) continue;
    std::uint32_t dword = 0;
    for (std::size_t k = 0; k < 4 && off + k < n; ++k)
      dword |= static_cast<std::uint32_t>(image[off + k]) << (8 * k);
    sum += dword;
    sum = (sum & 0xffffffffull) + (sum >> 32);
  }
  sum = (sum & 0xffff) + (sum >> 16);
  sum += sum >> 16;
  sum &= 0xffff;
  return static_cast<std::uint32_t>(sum + n);
}

}  // namespace gam::pe
