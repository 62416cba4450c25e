#include <doctest.h>

#include <cmath>

#include "gam/fixtures.hpp"
#include "gam/manipulation.hpp"
#include "gam/rng.hpp"
#include "helpers.hpp"

using namespace gam;
using testutil::two_section_image;

namespace {

PayloadCorpus toy_corpus() {
  PayloadCorpus corpus;
  Bytes a(1000);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<std::uint8_t>(i & 0xff);
  Bytes b(2000, 0x42);
  Bytes c(600);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<std::uint8_t>(255 - (i & 0xff));
  corpus.sections.push_back({".rdata", std::move(a)});
  corpus.sections.push_back({".rdata", std::move(b)});
  corpus.sections.push_back({".text", std::move(c)});
  return corpus;
}

ManipulationVector vec(std::initializer_list<double> values) {
  return ManipulationVector{std::vector<double>(values)};
}

}  // namespace

TEST_CASE("padding appends exactly the selected prefix") {
  const pe::PeFile x = pe::parse(two_section_image().build());
  PayloadCorpus corpus;
  Bytes content(1000);
  for (std::size_t i = 0; i < content.size(); ++i)
    content[i] = static_cast<std::uint8_t>(i * 3 + 1);
  corpus.sections.push_back({".rdata", content});

  const pe::PeFile y = apply(x, vec({0.4}), corpus, InjectionMode::Padding);
  const Bytes before = pe::serialize(x);
  const Bytes after = pe::serialize(y);

  REQUIRE(after.size() == before.size() + 400);
  CHECK(std::equal(before.begin(), before.end(), after.begin()));  // exact prefix
  CHECK(std::equal(content.begin(), content.begin() + 400, after.begin() + before.size()));
  CHECK(pe::validate(y).empty());
}

TEST_CASE("the all-zeros vector is the byte identity in both modes") {
  const pe::PeFile x = pe::parse(two_section_image().build());
  const auto corpus = toy_corpus();
  const auto zeros = ManipulationVector::zeros(corpus.size());
  CHECK(pe::serialize(apply(x, zeros, corpus, InjectionMode::Padding)) == pe::serialize(x));
  CHECK(pe::serialize(apply(x, zeros, corpus, InjectionMode::SectionInjection)) ==
        pe::serialize(x));
}

TEST_CASE("section injection adds one 40-byte entry per nonzero element") {
  const pe::PeFile x = pe::parse(two_section_image().build());
  const auto corpus = toy_corpus();

  const pe::PeFile y = apply(x, vec({1.0, 0.0, 1.0}), corpus, InjectionMode::SectionInjection);
  CHECK(y.coff.section_count() == 4);
  CHECK(y.section_headers.size() == 4);
  CHECK(y.table_end() - y.table_offset() == x.table_end() - x.table_offset() + 80);
  CHECK(pe::validate(y).empty());

  // payload contents land in the new sections, prefix-truncated and padded
  CHECK(y.section_headers[2].virtual_size() == 1000);
  CHECK(y.section_headers[3].virtual_size() == 600);
  CHECK(std::equal(corpus.sections[0].content.begin(), corpus.sections[0].content.end(),
                   y.section_data[2].begin()));
  CHECK(y.section_data[2].size() == pe::align_up(1000, 0x200));
  CHECK((y.section_headers[2].characteristics() & pe::kScnMemExecute) == 0);
  CHECK((y.section_headers[2].characteristics() & pe::kScnMemRead) != 0);
  CHECK((y.section_headers[2].characteristics() & pe::kScnInitializedData) != 0);

  // names: source name plus one-digit ordinal
  CHECK(y.section_headers[2].name() == ".rdata0");
  CHECK(y.section_headers[3].name() == ".text1");
}

TEST_CASE("fractional section injection takes the floor prefix") {
  const pe::PeFile x = pe::parse(two_section_image().build());
  const auto corpus = toy_corpus();
  // 0.4 * 1000 = 400; 0.333 * 2000 = 666; 0.5 * 600 = 300
  const pe::PeFile y =
      apply(x, vec({0.4, 0.333, 0.5}), corpus, InjectionMode::SectionInjection);
  REQUIRE(y.section_headers.size() == 5);
  CHECK(y.section_headers[2].virtual_size() == 400);
  CHECK(y.section_headers[3].virtual_size() == 666);
  CHECK(y.section_headers[4].virtual_size() == 300);
  CHECK(pe::validate(y).empty());
}

TEST_CASE("functionality-preserving fields stay untouched") {
  const pe::PeFile x = pe::parse(pe::serialize(make_fixture(FixtureProfile::benign_like(2), 0)));
  const auto corpus = toy_corpus();
  Rng rng(99);

  for (int trial = 0; trial < 20; ++trial) {
    ManipulationVector s;
    for (std::size_t i = 0; i < corpus.size(); ++i) s.values.push_back(rng.uniform());
    const auto mode = trial % 2 == 0 ? InjectionMode::Padding : InjectionMode::SectionInjection;
    const pe::PeFile y = apply(x, s, corpus, mode);

    CHECK(y.optional.entry_point() == x.optional.entry_point());
    CHECK(y.optional.data_directory_count() == x.optional.data_directory_count());
    for (std::uint32_t d = 0; d < x.optional.data_directory_count(); ++d)
      CHECK(y.optional.data_directory(d) == x.optional.data_directory(d));
    for (std::size_t i = 0; i < x.section_headers.size(); ++i) {
      CHECK(y.section_headers[i].virtual_address() == x.section_headers[i].virtual_address());
      CHECK(y.section_headers[i].virtual_size() == x.section_headers[i].virtual_size());
      CHECK(y.section_headers[i].characteristics() == x.section_headers[i].characteristics());
      CHECK(y.section_data[i] == x.section_data[i]);
    }
    CHECK(pe::validate(y).empty());
  }
}

TEST_CASE("header growth shifts raw pointers together") {
  // 3 plan sections leave 0x10 bytes of padding; a dozen new entries force
  // size_of_headers to grow by one file-alignment step or more.
  const pe::PeFile x = pe::parse(pe::serialize(make_fixture(FixtureProfile::benign_like(4), 1)));
  const std::uint64_t old_headers = x.optional.size_of_headers();

  PayloadCorpus corpus;
  for (int i = 0; i < 12; ++i) corpus.sections.push_back({".pay", Bytes(64, std::uint8_t(i))});
  ManipulationVector ones{std::vector<double>(corpus.size(), 1.0)};

  const pe::PeFile y = apply(x, ones, corpus, InjectionMode::SectionInjection);
  const std::uint64_t new_headers = y.optional.size_of_headers();
  CHECK(new_headers > old_headers);
  CHECK((new_headers - old_headers) % x.optional.file_alignment() == 0);
  for (std::size_t i = 0; i < x.section_headers.size(); ++i) {
    CHECK(y.section_headers[i].raw_pointer() ==
          x.section_headers[i].raw_pointer() + (new_headers - old_headers));
    CHECK(y.section_data[i] == x.section_data[i]);
  }
  CHECK(pe::validate(y).empty());
  CHECK(pe::parse(pe::serialize(y)).section_headers.size() == y.section_headers.size());
}

TEST_CASE("penalty is the size-weighted dot product") {
  PayloadCorpus corpus;
  corpus.sections.push_back({".a", Bytes(1000, 1)});
  corpus.sections.push_back({".b", Bytes(2000, 2)});

  CHECK(penalty(vec({0.5, 0.25}), corpus) == doctest::Approx(1000.0).epsilon(1e-12));
  CHECK(penalty(vec({0.0, 0.0}), corpus) == 0.0);
  CHECK(penalty(vec({1.0, 1.0}), corpus) == doctest::Approx(3000.0).epsilon(1e-12));
}

TEST_CASE("injected_size reports the true on-disk delta") {
  const pe::PeFile x = pe::parse(two_section_image().build());

  SUBCASE("padding") {
    PayloadCorpus corpus;
    corpus.sections.push_back({".rdata", Bytes(1000, 0x11)});
    const pe::PeFile y = apply(x, vec({0.4}), corpus, InjectionMode::Padding);
    CHECK(injected_size(x, y) == 400);
  }
  SUBCASE("section injection accounts alignment exactly") {
    PayloadCorpus corpus;
    corpus.sections.push_back({".rdata", Bytes(100, 0x22)});
    const pe::PeFile y = apply(x, vec({1.0}), corpus, InjectionMode::SectionInjection);
    // table grows within existing padding (0x1c8 + 40 <= 0x400), so the only
    // growth is the aligned payload
    CHECK(injected_size(x, y) == pe::align_up(100, 0x200));
    CHECK(injected_size(x, y) >= 512);
  }
  SUBCASE("zeros") {
    const auto corpus = toy_corpus();
    const pe::PeFile y =
        apply(x, ManipulationVector::zeros(corpus.size()), corpus, InjectionMode::Padding);
    CHECK(injected_size(x, y) == 0);
  }
}

TEST_CASE("monotonicity: larger fractions never shrink payloads") {
  const auto corpus = toy_corpus();
  Rng rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    ManipulationVector lo, hi;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const double a = rng.uniform(), b = rng.uniform();
      lo.values.push_back(std::min(a, b));
      hi.values.push_back(std::max(a, b));
    }
    CHECK(penalty(lo, corpus) <= penalty(hi, corpus));
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto c = static_cast<double>(corpus.sections[i].content.size());
      CHECK(std::floor(lo.values[i] * c) <= std::floor(hi.values[i] * c));
    }
  }
}

TEST_CASE("overlay padding lands after an existing overlay") {
  auto builder = two_section_image();
  builder.overlay = {0xAA, 0xBB, 0xCC};
  const pe::PeFile x = pe::parse(builder.build());

  PayloadCorpus corpus;
  corpus.sections.push_back({".rdata", Bytes(10, 0x77)});
  const pe::PeFile y = apply(x, vec({1.0}), corpus, InjectionMode::Padding);
  const Bytes out = pe::serialize(y);
  const Bytes base = pe::serialize(x);
  CHECK(std::equal(base.begin(), base.end(), out.begin()));
  CHECK(out.size() == base.size() + 10);
}

TEST_CASE("error paths") {
  const pe::PeFile x = pe::parse(two_section_image().build());
  const auto corpus = toy_corpus();

  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(apply(x, vec({0.5}), corpus, InjectionMode::Padding), ManipulationError);
    CHECK_THROWS_AS(penalty(vec({0.5}), corpus), ManipulationError);
  }
  SUBCASE("element out of range") {
    CHECK_THROWS_AS(apply(x, vec({0.5, 1.5, 0.0}), corpus, InjectionMode::Padding),
                    ManipulationError);
  }
  SUBCASE("layout overflow") {
    pe::PeFile big = x;
    big.optional.set_size_of_image(0xFFFFF000);
    CHECK_THROWS_AS(apply(big, vec({1.0, 1.0, 1.0}), corpus, InjectionMode::SectionInjection),
                    pe::LayoutError);
  }
}
