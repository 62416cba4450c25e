#pragma once

#include <unistd.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gam/bytes.hpp"

namespace testutil {

// Hand-rolled PE image builder, independent of gam::pe::serialize. Field
// offsets are written straight from the public format layout so parser tests
// have a second opinion on where everything lives.
class PeImageBuilder {
 public:
  struct Section {
    std::string name;
    std::uint32_t virtual_size;
    std::uint32_t virtual_address;
    gam::Bytes raw_data;          // written at raw_pointer, length = raw size
    std::uint32_t raw_pointer;
    std::uint32_t characteristics;
  };

  std::uint32_t e_lfanew = 0x80;
  std::uint32_t section_alignment = 0x1000;
  std::uint32_t file_alignment = 0x200;
  std::uint32_t size_of_headers = 0x400;
  std::uint32_t size_of_image = 0x3000;
  std::uint32_t entry_point = 0x1010;
  std::uint32_t checksum = 0;
  std::vector<Section> sections;
  gam::Bytes overlay;

  gam::Bytes build() const {
    gam::Bytes img;
    auto put8 = [&img](std::uint8_t v) { img.push_back(v); };
    auto put16 = [&img](std::uint16_t v) {
      img.push_back(v & 0xff);
      img.push_back(v >> 8);
    };
    auto put32 = [&img](std::uint32_t v) {
      for (int i = 0; i < 4; ++i) img.push_back((v >> (8 * i)) & 0xff);
    };
    auto pad_to = [&img](std::size_t n) { img.resize(n, 0); };

    put8('M');
    put8('Z');
    pad_to(0x3c);
    put32(e_lfanew);
    pad_to(0x40);
    for (std::size_t i = 0x40; i < e_lfanew; ++i) put8(0xDD);  // stub filler

    put8('P');
    put8('E');
    put8(0);
    put8(0);
    put16(0x14c);                                   // machine: i386
    put16(static_cast<std::uint16_t>(sections.size()));
    put32(0x5f000001);                              // timestamp (opaque)
    put32(0);                                       // symbol table ptr
    put32(0);                                       // symbol count
    put16(0xE0);                                    // optional header size
    put16(0x0102);                                  // characteristics

    const std::size_t opt_start = img.size();
    put16(0x10b);  // PE32
    put8(14);
    put8(0);                // linker version
    put32(0x600);           // size of code
    put32(0x800);           // size of initialized data
    put32(0);               // size of uninitialized data
    put32(entry_point);
    put32(0x1000);          // base of code
    put32(0x2000);          // base of data
    put32(0x400000);        // image base
    put32(section_alignment);
    put32(file_alignment);
    put16(6);
    put16(0);               // OS version
    put16(0);
    put16(0);               // image version
    put16(6);
    put16(0);               // subsystem version
    put32(0);               // win32 version
    put32(size_of_image);
    put32(size_of_headers);
    put32(checksum);
    put16(3);               // console subsystem
    put16(0x8140);          // dll characteristics
    put32(0x100000);        // stack reserve
    put32(0x1000);          // stack commit
    put32(0x100000);        // heap reserve
    put32(0x1000);          // heap commit
    put32(0);               // loader flags
    put32(16);              // rva & sizes count
    for (int i = 0; i < 16; ++i) {
      put32(0);
      put32(0);
    }
    pad_to(opt_start + 0xE0);

    for (const auto& s : sections) {
      for (std::size_t i = 0; i < 8; ++i)
        put8(i < s.name.size() ? static_cast<std::uint8_t>(s.name[i]) : 0);
      put32(s.virtual_size);
      put32(s.virtual_address);
      put32(static_cast<std::uint32_t>(s.raw_data.size()));
      put32(s.raw_pointer);
      put32(0);
      put32(0);
      put16(0);
      put16(0);
      put32(s.characteristics);
    }

    std::size_t end = size_of_headers;
    for (const auto& s : sections) end = std::max<std::size_t>(end, s.raw_pointer + s.raw_data.size());
    pad_to(end);
    for (const auto& s : sections)
      std::copy(s.raw_data.begin(), s.raw_data.end(), img.begin() + s.raw_pointer);
    img.insert(img.end(), overlay.begin(), overlay.end());
    return img;
  }
};

// Two sections (.text at 0x400, .data at 0xA00), deterministic contents.
inline PeImageBuilder two_section_image() {
  PeImageBuilder b;
  PeImageBuilder::Section text;
  text.name = ".text";
  text.virtual_size = 0x550;
  text.virtual_address = 0x1000;
  text.raw_data.resize(0x600);
  for (std::size_t i = 0; i < text.raw_data.size(); ++i)
    text.raw_data[i] = static_cast<std::uint8_t>(i * 7 + 1);
  text.raw_pointer = 0x400;
  text.characteristics = 0x60000020;

  PeImageBuilder::Section data;
  data.name = ".data";
  data.virtual_size = 0x123;
  data.virtual_address = 0x2000;
  data.raw_data.resize(0x200);
  for (std::size_t i = 0; i < data.raw_data.size(); ++i)
    data.raw_data[i] = static_cast<std::uint8_t>(i * 13 + 5);
  data.raw_pointer = 0xA00;
  data.characteristics = 0xC0000040;

  b.sections = {text, data};
  b.size_of_image = 0x3000;
  return b;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gam-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
