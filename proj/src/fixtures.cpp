#include "gam/fixtures.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

#include "gam/rng.hpp"

namespace gam {

namespace {

using pe::align_up;

constexpr std::uint32_t kFileAlign = 0x200;
constexpr std::uint32_t kSectionAlign = 0x1000;
constexpr std::uint32_t kPeOffset = 0x80;
constexpr std::uint16_t kOptionalSize = 0xE0;  // PE32 with 16 data directories

const char* const kStringPool[] = {
    "https://updates.example-vendor.com/v2/manifest",
    "http://mirror.example-cdn.net/pkg/base.cab",
    "C:\\Program Files\\Common Files\\System\\msvcrt.dll",
    "C:\\Windows\\System32\\kernel32.dll",
    "HKEY_LOCAL_MACHINE\\SOFTWARE\\Microsoft\\Windows\\CurrentVersion",
    "HKEY_CURRENT_USER\\Software\\Classes",
    "Copyright (c) Example Software Corporation",
    "invalid parameter passed to runtime function",
    "Microsoft Visual C++ Runtime Library",
    "GetProcAddress", "LoadLibraryW", "VirtualAlloc", "CreateFileMappingA",
    "application/octet-stream", "Content-Type", "User-Agent: Updater/5.1",
};

std::array<double, 256> normalized(std::array<double, 256> w) {
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= sum;
  return w;
}

// CDF sampler; std::discrete_distribution is implementation-defined, this is
// not.
struct ByteSampler {
  std::array<double, 256> cdf{};
  explicit ByteSampler(const std::array<double, 256>& weights) {
    double acc = 0;
    for (int i = 0; i < 256; ++i) {
      acc += weights[i];
      cdf[i] = acc;
    }
    cdf[255] = 1.0;
  }
  std::uint8_t draw(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<std::uint8_t>(it - cdf.begin());
  }
};

Bytes sample_bytes(const ByteSampler& sampler, std::size_t n, Rng& rng) {
  Bytes out(n);
  for (auto& b : out) b = sampler.draw(rng);
  return out;
}

// String-table-looking content: NUL-separated constants from the pool, then
// profile bytes for the rest of the section.
Bytes rdata_content(const ByteSampler& sampler, std::size_t n, Rng& rng) {
  Bytes out;
  out.reserve(n);
  const std::size_t table_target = n * 3 / 5;
  while (out.size() < table_target) {
    const char* s = kStringPool[rng.below(std::size(kStringPool))];
    out.insert(out.end(), s, s + std::strlen(s));
    out.push_back(0);
  }
  if (out.size() > n) out.resize(n);
  while (out.size() < n) out.push_back(sampler.draw(rng));
  return out;
}

}  // namespace

FixtureProfile FixtureProfile::benign_like(std::uint64_t seed) {
  FixtureProfile p;
  p.cls = FixtureClass::BenignLike;
  std::array<double, 256> w{};
  for (int i = 0; i < 256; ++i) w[i] = 0.15;
  w[0x00] = 64.0;
  w[0xFF] = 2.0;
  for (int i = 0x20; i <= 0x7E; ++i) w[i] = 2.0;
  p.byte_distribution = normalized(w);
  p.section_plan = {
      {".text", 28 * 1024, pe::kScnCode | pe::kScnMemExecute | pe::kScnMemRead},
      {".rdata", 24 * 1024, pe::kScnInitializedData | pe::kScnMemRead},
      {".data", 12 * 1024, pe::kScnInitializedData | pe::kScnMemRead | pe::kScnMemWrite},
  };
  p.seed = seed;
  return p;
}

FixtureProfile FixtureProfile::malware_like(std::uint64_t seed) {
  FixtureProfile p;
  p.cls = FixtureClass::MalwareLike;
  // Half packed-looking near-uniform bytes, half ordinary program content.
  // The blend keeps the classes statistically distinct without the synthetic
  // cliff a pure high-entropy profile would create; detector margins stay in
  // the range where injected benign content can actually move the score.
  Rng rng(Rng::mix(seed, 0xDA7A));
  const std::array<double, 256> benign = benign_like(seed).byte_distribution;
  std::array<double, 256> w{};
  for (int i = 0; i < 256; ++i) w[i] = 0.5 * (0.8 + 0.4 * rng.uniform()) / 256.0 + 0.5 * benign[i];
  p.byte_distribution = normalized(w);
  p.section_plan = {
      {".text", 36 * 1024, pe::kScnCode | pe::kScnMemExecute | pe::kScnMemRead},
      {".data", 10 * 1024,
       pe::kScnInitializedData | pe::kScnMemRead | pe::kScnMemWrite},
  };
  p.seed = seed;
  return p;
}

pe::PeFile make_fixture(const FixtureProfile& profile, std::uint64_t index) {
  Rng rng(Rng::mix(profile.seed, index));
  const ByteSampler sampler(profile.byte_distribution);

  pe::PeFile f;
  static const char kStubText[] = "This stub only reports that the program needs a newer system.";
  f.dos.stub.assign(kPeOffset - pe::kDosHeaderSize, 0);
  std::copy_n(kStubText, std::min(sizeof(kStubText) - 1, f.dos.stub.size()), f.dos.stub.begin());
  f.dos.pe_offset = kPeOffset;

  const auto nsec = static_cast<std::uint16_t>(profile.section_plan.size());
  f.coff.set_machine(0x14c);
  f.coff.set_section_count(nsec);
  f.coff.set_optional_header_size(kOptionalSize);
  f.coff.set_characteristics(0x0102);  // executable image, 32-bit machine
  write_u32(f.coff.raw, 4, static_cast<std::uint32_t>(Rng::mix(profile.seed, index) >> 32));

  f.optional.raw.assign(kOptionalSize, 0);
  auto& opt = f.optional;
  write_u16(opt.raw, 0, pe::kMagicPe32);
  opt.raw[2] = 14;  // linker version
  write_u32(opt.raw, 28, 0x400000);  // image base
  opt.set_section_alignment(kSectionAlign);
  opt.set_file_alignment(kFileAlign);
  write_u16(opt.raw, 40, 6);  // OS version
  write_u16(opt.raw, 48, 6);  // subsystem version
  write_u16(opt.raw, 68, 3);  // console subsystem
  write_u16(opt.raw, 70, 0x8140);
  write_u32(opt.raw, 72, 0x100000);  // stack reserve
  write_u32(opt.raw, 76, 0x1000);    // stack commit
  write_u32(opt.raw, 80, 0x100000);  // heap reserve
  write_u32(opt.raw, 84, 0x1000);    // heap commit
  write_u32(opt.raw, 92, 16);        // data directory count

  const std::uint64_t table_off = std::uint64_t{kPeOffset} + 4 + pe::kCoffHeaderSize + kOptionalSize;
  const std::uint32_t headers_size = static_cast<std::uint32_t>(
      align_up(table_off + std::uint64_t{nsec} * pe::kSectionHeaderSize, kFileAlign));
  opt.set_size_of_headers(headers_size);

  std::uint32_t va = kSectionAlign;
  std::uint32_t raw_ptr = headers_size;
  std::uint32_t size_of_code = 0;
  std::uint32_t size_of_data = 0;
  for (const auto& plan : profile.section_plan) {
    const std::uint32_t lo = plan.base_size * 3 / 4;
    const auto content_size =
        static_cast<std::uint32_t>(lo + rng.below(plan.base_size - lo + 1));
    Bytes content = plan.name == ".rdata" ? rdata_content(sampler, content_size, rng)
                                          : sample_bytes(sampler, content_size, rng);
    const auto raw_size = static_cast<std::uint32_t>(align_up(content.size(), kFileAlign));
    content.resize(raw_size, 0);

    pe::SectionHeader h;
    h.set_name(plan.name);
    h.set_virtual_size(content_size);
    h.set_virtual_address(va);
    h.set_raw_size(raw_size);
    h.set_raw_pointer(raw_ptr);
    h.set_characteristics(plan.characteristics);
    f.section_headers.push_back(h);
    f.section_data.push_back(std::move(content));

    if (plan.characteristics & pe::kScnCode)
      size_of_code += raw_size;
    else
      size_of_data += raw_size;
    va = static_cast<std::uint32_t>(align_up(std::uint64_t{va} + content_size, kSectionAlign));
    raw_ptr += raw_size;
  }

  write_u32(opt.raw, 4, size_of_code);
  write_u32(opt.raw, 8, size_of_data);
  opt.set_entry_point(kSectionAlign + 0x10);
  write_u32(opt.raw, 20, kSectionAlign);  // base of code
  opt.set_size_of_image(va);

  f.header_padding.assign(headers_size - table_off - nsec * pe::kSectionHeaderSize, 0);
  return f;
}

std::vector<std::filesystem::path> generate_fixtures(const FixtureProfile& profile, int count,
                                                     const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const char* prefix = profile.cls == FixtureClass::BenignLike ? "benign" : "malware";
  std::vector<std::filesystem::path> paths;
  paths.reserve(count);
  for (int i = 0; i < count; ++i) {
    const Bytes image = pe::serialize(make_fixture(profile, i));
    char name[64];
    std::snprintf(name, sizeof(name), "%s-%04d.exe", prefix, i);
    const auto path = out_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(image.data()), image.size());
    if (!out) throw std::runtime_error("cannot write fixture " + path.string());
    paths.push_back(path);
  }
  return paths;
}

}  // namespace gam
