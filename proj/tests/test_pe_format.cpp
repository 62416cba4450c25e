#include <doctest.h>

#include "gam/pe.hpp"
#include "gam/rng.hpp"
#include "helpers.hpp"

using namespace gam;
using testutil::two_section_image;

TEST_CASE("align_up basics") {
  CHECK(pe::align_up(0x201, 0x200) == 0x400);
  CHECK(pe::align_up(0x400, 0x200) == 0x400);
  CHECK(pe::align_up(0, 0x1000) == 0);
  CHECK(pe::align_up(17, 1) == 17);
  CHECK_THROWS_AS(pe::align_up(5, 0), pe::ZeroAlignment);
}

TEST_CASE("parse decomposes a hand-built two-section image") {
  const auto builder = two_section_image();
  const Bytes img = builder.build();
  const pe::PeFile f = pe::parse(img);

  CHECK(f.coff.section_count() == 2);
  CHECK(f.section_headers.size() == 2);
  CHECK(f.dos.pe_offset == 0x80);
  CHECK(f.dos.stub.size() == 0x40);
  CHECK(f.dos.stub.front() == 0xDD);
  CHECK(f.coff.machine() == 0x14c);
  CHECK(f.optional.magic() == pe::kMagicPe32);
  CHECK(f.optional.entry_point() == 0x1010);
  CHECK(f.optional.section_alignment() == 0x1000);
  CHECK(f.optional.file_alignment() == 0x200);
  CHECK(f.optional.size_of_headers() == 0x400);
  CHECK(f.optional.size_of_image() == 0x3000);
  CHECK(f.optional.data_directory_count() == 16);
  CHECK(f.section_headers[0].name() == ".text");
  CHECK(f.section_headers[1].name() == ".data");
  CHECK(f.section_headers[0].raw_pointer() == 0x400);
  CHECK(f.section_headers[0].raw_size() == 0x600);
  CHECK(f.section_headers[1].virtual_size() == 0x123);
  CHECK(f.section_data[0] == builder.sections[0].raw_data);
  CHECK(f.section_data[1] == builder.sections[1].raw_data);
  // padding spans [table end, size_of_headers)
  CHECK(f.header_padding.size() == 0x400 - (0x80 + 4 + 20 + 0xE0 + 2 * 40));
  CHECK(f.overlay.empty());
  CHECK(f.gaps.empty());
}

TEST_CASE("round trip is the byte identity") {
  auto builder = two_section_image();
  SUBCASE("plain") {}
  SUBCASE("with overlay") {
    builder.overlay = {9, 8, 7, 6, 5, 4, 3, 2, 1};
  }
  SUBCASE("with nonzero checksum field") { builder.checksum = 0xDEADBEEF; }
  const Bytes img = builder.build();
  CHECK(pe::serialize(pe::parse(img)) == img);
}

TEST_CASE("parse of re-serialized file is stable") {
  auto builder = two_section_image();
  builder.overlay = {1, 2, 3};
  const Bytes img = builder.build();
  const Bytes once = pe::serialize(pe::parse(img));
  const Bytes twice = pe::serialize(pe::parse(once));
  CHECK(once == twice);
  CHECK(once == img);
}

TEST_CASE("inter-section slack is captured and re-emitted") {
  auto builder = two_section_image();
  builder.sections[1].raw_pointer = 0xC00;  // leaves [0xA00, 0xC00) unowned
  Bytes img = builder.build();
  for (std::size_t off = 0xA00; off < 0xC00; ++off) img[off] = 0xEE;
  const pe::PeFile f = pe::parse(img);
  REQUIRE(f.gaps.size() == 1);
  CHECK(f.gaps[0].offset == 0xA00);
  CHECK(f.gaps[0].bytes.size() == 0x200);
  CHECK(f.gaps[0].bytes.front() == 0xEE);
  CHECK(pe::serialize(f) == img);
}

TEST_CASE("parse rejects bad magics and offsets with typed errors") {
  auto builder = two_section_image();
  Bytes img = builder.build();

  SUBCASE("ZZ magic") {
    img[0] = 'Z';
    img[1] = 'Z';
    try {
      pe::parse(img);
      FAIL("expected ParseError");
    } catch (const pe::ParseError& e) {
      CHECK(e.code() == pe::ParseErrc::BadMzMagic);
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("e_lfanew beyond EOF") {
    write_u32(img, 0x3c, static_cast<std::uint32_t>(img.size() + 8));
    try {
      pe::parse(img);
      FAIL("expected ParseError");
    } catch (const pe::ParseError& e) {
      CHECK(e.code() == pe::ParseErrc::BadPeOffset);
      CHECK(e.offset() == 0x3c);
    }
  }
  SUBCASE("e_lfanew overlapping the DOS header") {
    write_u32(img, 0x3c, 0x20);
    try {
      pe::parse(img);
      FAIL("expected ParseError");
    } catch (const pe::ParseError& e) {
      CHECK(e.code() == pe::ParseErrc::BadPeOffset);
    }
  }
  SUBCASE("wrong PE signature") {
    img[0x80] = 'X';
    try {
      pe::parse(img);
      FAIL("expected ParseError");
    } catch (const pe::ParseError& e) {
      CHECK(e.code() == pe::ParseErrc::BadPeMagic);
      CHECK(e.offset() == 0x80);
    }
  }
  SUBCASE("section data beyond EOF") {
    // grow the first section's raw size beyond the file end
    const std::size_t entry = 0x80 + 4 + 20 + 0xE0;
    write_u32(img, entry + 16, 0x100000);
    try {
      pe::parse(img);
      FAIL("expected ParseError");
    } catch (const pe::ParseError& e) {
      CHECK(e.code() == pe::ParseErrc::MalformedSectionTable);
      CHECK(e.offset() == entry);
    }
  }
  SUBCASE("overlapping raw ranges") {
    const std::size_t entry = 0x80 + 4 + 20 + 0xE0 + 40;
    write_u32(img, entry + 20, 0x500);  // .data now starts inside .text
    CHECK_THROWS_AS(pe::parse(img), pe::ParseError);
  }
}

TEST_CASE("every truncation yields a typed error, never a crash") {
  const Bytes img = two_section_image().build();
  for (std::size_t len = 0; len < img.size(); len += 7) {
    const Bytes prefix(img.begin(), img.begin() + len);
    CHECK_THROWS_AS(pe::parse(prefix), pe::ParseError);
  }
}

TEST_CASE("random blobs never crash the parser") {
  Rng rng(0xF00D);
  for (int trial = 0; trial < 200; ++trial) {
    Bytes blob(rng.below(4096));
    for (auto& b : blob) b = static_cast<std::uint8_t>(rng.below(256));
    try {
      const pe::PeFile f = pe::parse(blob);
      CHECK(pe::serialize(f) == blob);  // accepted implies exact round trip
    } catch (const pe::ParseError&) {
      // typed rejection is fine
    }
  }
}

TEST_CASE("serialize rejects overlapping layouts") {
  pe::PeFile f = pe::parse(two_section_image().build());
  f.section_headers[1].set_raw_pointer(0x500);  // collides with .text
  CHECK_THROWS_AS(pe::serialize(f), pe::LayoutError);
}

TEST_CASE("validate accepts the parsed fixture and reports planted defects") {
  const Bytes img = two_section_image().build();
  pe::PeFile f = pe::parse(img);
  CHECK(pe::validate(f).empty());

  SUBCASE("image size below last section extent") {
    f.optional.set_size_of_image(0x1000);  // aligned, but < 0x2000 + 0x123
    const auto violations = pe::validate(f);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].code == pe::ViolationCode::ImageSizeTooSmall);
  }
  SUBCASE("misaligned raw pointer") {
    f.section_headers[1].set_raw_pointer(0xA10);
    f.gaps.clear();
    bool found = false;
    for (const auto& v : pe::validate(f))
      found |= v.code == pe::ViolationCode::MisalignedRawData;
    CHECK(found);
  }
  SUBCASE("section count mismatch") {
    f.coff.set_section_count(5);
    bool found = false;
    for (const auto& v : pe::validate(f))
      found |= v.code == pe::ViolationCode::SectionCountMismatch;
    CHECK(found);
  }
  SUBCASE("descending virtual addresses") {
    f.section_headers[1].set_virtual_address(0x500);
    bool found = false;
    for (const auto& v : pe::validate(f))
      found |= v.code == pe::ViolationCode::UnsortedSections;
    CHECK(found);
  }
}

TEST_CASE("stale checksum is a warning, not a violation") {
  pe::PeFile f = pe::parse(two_section_image().build());

  f.optional.set_checksum(12345);  // almost surely wrong
  auto violations = pe::validate(f);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].code == pe::ViolationCode::StaleChecksum);
  CHECK(violations[0].severity == pe::Severity::Warning);
  CHECK(pe::is_clean(violations));

  // writing the true checksum silences the warning
  const Bytes img = pe::serialize(f);
  const std::size_t ck_off = 0x80 + 4 + 20 + 64;
  f.optional.set_checksum(pe::compute_checksum(img, ck_off));
  CHECK(pe::validate(f).empty());
}

TEST_CASE("section table length is 40 bytes per entry") {
  const pe::PeFile f = pe::parse(two_section_image().build());
  CHECK(f.table_end() - f.table_offset() == 40 * f.section_headers.size());
}
