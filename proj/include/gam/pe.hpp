#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gam/bytes.hpp"

namespace gam::pe {

// On-disk layout constants (all fields little-endian):
//   0x00  "MZ"
//   0x3c  u32 offset of the PE signature (e_lfanew)
//   e_lfanew        "PE\0\0"
//   e_lfanew + 4    COFF header, 20 bytes
//   e_lfanew + 24   optional header, CoffHeader::optional_header_size bytes
//   then            section table, 40 bytes per entry
//   then            padding up to OptionalHeader::size_of_headers
//   then            section raw data at each entry's raw_pointer
//   then            overlay (everything after the last owned byte)
inline constexpr std::size_t kDosHeaderSize = 0x40;
inline constexpr std::size_t kPeOffsetField = 0x3c;
inline constexpr std::size_t kCoffHeaderSize = 20;
inline constexpr std::size_t kSectionHeaderSize = 40;
inline constexpr std::uint16_t kMagicPe32 = 0x10b;
inline constexpr std::uint16_t kMagicPe32Plus = 0x20b;

// Section characteristics bits used by this tool.
inline constexpr std::uint32_t kScnCode = 0x00000020;
inline constexpr std::uint32_t kScnInitializedData = 0x00000040;
inline constexpr std::uint32_t kScnMemExecute = 0x20000000;
inline constexpr std::uint32_t kScnMemRead = 0x40000000;
inline constexpr std::uint32_t kScnMemWrite = 0x80000000;

enum class ParseErrc {
  BadMzMagic,
  BadPeOffset,
  BadPeMagic,
  TruncatedHeader,
  MalformedSectionTable,
};

/// Thrown by parse(); carries the file offset of the offending field.
class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrc code, std::uint64_t offset, const std::string& what);
  ParseErrc code() const { return code_; }
  std::uint64_t offset() const { return offset_; }

 private:
  ParseErrc code_;
  std::uint64_t offset_;
};

/// Thrown by serialize() when two components claim the same byte range, and
/// by layout edits that would overflow a 32-bit header field.
class LayoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroAlignment : public std::invalid_argument {
 public:
  ZeroAlignment() : std::invalid_argument("alignment must be nonzero") {}
};

/// Smallest multiple of `alignment` that is >= `value`.
std::uint64_t align_up(std::uint64_t value, std::uint64_t alignment);

struct DosHeader {
  std::array<std::uint8_t, 2> magic{{'M', 'Z'}};
  // Bytes 0x02..0x3c carried verbatim; nothing in there matters to a modern
  // loader and re-emitting them untouched keeps round trips byte-exact.
  std::array<std::uint8_t, kPeOffsetField - 2> reserved{};
  std::uint32_t pe_offset = 0;  // e_lfanew
  Bytes stub;                   // [0x40, e_lfanew)
};

/// 20-byte COFF header kept as raw bytes with typed accessors, so fields this
/// tool never interprets (timestamp, symbol table) survive verbatim.
struct CoffHeader {
  std::array<std::uint8_t, kCoffHeaderSize> raw{};

  std::uint16_t machine() const { return read_u16(raw, 0); }
  std::uint16_t section_count() const { return read_u16(raw, 2); }
  std::uint16_t optional_header_size() const { return read_u16(raw, 16); }
  std::uint16_t characteristics() const { return read_u16(raw, 18); }

  void set_machine(std::uint16_t v) { write_u16(raw, 0, v); }
  void set_section_count(std::uint16_t v) { write_u16(raw, 2, v); }
  void set_optional_header_size(std::uint16_t v) { write_u16(raw, 16, v); }
  void set_characteristics(std::uint16_t v) { write_u16(raw, 18, v); }
};

/// Optional header held verbatim; accessors patch the few fields the
/// manipulations need. Field offsets are identical for PE32 and PE32+ in the
/// range used here (the PE32+ 8-byte image base absorbs PE32's base-of-data).
struct OptionalHeader {
  Bytes raw;

  std::uint16_t magic() const { return read_u16(raw, 0); }
  bool is_pe32_plus() const { return magic() == kMagicPe32Plus; }
  std::uint32_t entry_point() const { return read_u32(raw, 16); }
  std::uint32_t section_alignment() const { return read_u32(raw, 32); }
  std::uint32_t file_alignment() const { return read_u32(raw, 36); }
  std::uint32_t size_of_image() const { return read_u32(raw, 56); }
  std::uint32_t size_of_headers() const { return read_u32(raw, 60); }
  std::uint32_t checksum() const { return read_u32(raw, 64); }
  std::uint32_t data_directory_count() const;
  std::pair<std::uint32_t, std::uint32_t> data_directory(std::uint32_t i) const;

  void set_entry_point(std::uint32_t v) { write_u32(raw, 16, v); }
  void set_section_alignment(std::uint32_t v) { write_u32(raw, 32, v); }
  void set_file_alignment(std::uint32_t v) { write_u32(raw, 36, v); }
  void set_size_of_image(std::uint32_t v) { write_u32(raw, 56, v); }
  void set_size_of_headers(std::uint32_t v) { write_u32(raw, 60, v); }
  void set_checksum(std::uint32_t v) { write_u32(raw, 64, v); }

  /// Minimum raw size accepted by parse(): standard fields through the data
  /// directory count (96 bytes for PE32, 112 for PE32+).
  static std::size_t min_size(std::uint16_t magic);
};

struct SectionHeader {
  std::array<std::uint8_t, kSectionHeaderSize> raw{};

  std::array<std::uint8_t, 8> name_bytes() const;
  std::string name() const;  // trimmed at the first NUL
  std::uint32_t virtual_size() const { return read_u32(raw, 8); }
  std::uint32_t virtual_address() const { return read_u32(raw, 12); }
  std::uint32_t raw_size() const { return read_u32(raw, 16); }
  std::uint32_t raw_pointer() const { return read_u32(raw, 20); }
  std::uint32_t characteristics() const { return read_u32(raw, 36); }

  void set_name(const std::string& n);  // truncated / NUL-padded to 8 bytes
  void set_virtual_size(std::uint32_t v) { write_u32(raw, 8, v); }
  void set_virtual_address(std::uint32_t v) { write_u32(raw, 12, v); }
  void set_raw_size(std::uint32_t v) { write_u32(raw, 16, v); }
  void set_raw_pointer(std::uint32_t v) { write_u32(raw, 20, v); }
  void set_characteristics(std::uint32_t v) { write_u32(raw, 36, v); }
};

/// A byte range between sections that no component owns. Rare in practice;
/// captured so that serialize(parse(b)) == b holds for every accepted input.
struct Gap {
  std::uint64_t offset = 0;
  Bytes bytes;
};

struct PeFile {
  DosHeader dos;
  CoffHeader coff;
  OptionalHeader optional;
  std::vector<SectionHeader> section_headers;
  std::vector<Bytes> section_data;  // aligned with section_headers
  Bytes header_padding;             // [table end, size_of_headers)
  std::vector<Gap> gaps;
  Bytes overlay;

  std::uint64_t table_offset() const {
    return std::uint64_t{dos.pe_offset} + 4 + kCoffHeaderSize + optional.raw.size();
  }
  std::uint64_t table_end() const {
    return table_offset() + kSectionHeaderSize * section_headers.size();
  }
  /// End of the last byte owned by headers, padding, gaps or section data;
  /// the overlay is emitted from here.
  std::uint64_t overlay_offset() const;
};

enum class Severity { Error, Warning };

enum class ViolationCode {
  BadDosMagic,
  BadPeOffset,
  BadOptionalMagic,
  SectionCountMismatch,
  NonPowerOfTwoAlignment,
  MisalignedImageSize,
  MisalignedHeaderSize,
  MisalignedRawData,
  OverlappingSections,
  UnsortedSections,
  ImageSizeTooSmall,
  SectionDataSizeMismatch,
  StubSizeMismatch,
  StaleChecksum,  // warning: header checksum set but does not match contents
};

struct Violation {
  ViolationCode code;
  Severity severity;
  std::string detail;
};

const char* violation_name(ViolationCode code);

/// Decomposes `bytes` into a PeFile. Accepts anything structurally sound
/// enough to re-serialize byte-exactly; throws ParseError otherwise. Never
/// reads outside `bytes`.
PeFile parse(ByteView bytes);

/// Re-emits the file: every component at its recorded offset, unclaimed
/// ranges zero-filled, overlay last. Throws LayoutError if two components
/// claim the same byte range.
Bytes serialize(const PeFile& file);

/// Invariant check; empty result (ignoring warnings) means the file is clean.
std::vector<Violation> validate(const PeFile& file);

inline bool is_clean(const std::vector<Violation>& violations) {
  for (const auto& v : violations)
    if (v.severity == Severity::Error) return false;
  return true;
}

/// Standard PE image checksum (dword sum with carry folding plus file size),
/// skipping the 4 checksum bytes themselves. Used only to flag stale values.
std::uint32_t compute_checksum(ByteView image, std::size_t checksum_offset);

}  // namespace gam::pe
