#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gam/corpus.hpp"
#include "gam/pe.hpp"

namespace gam {

class ManipulationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One fraction per corpus section: element i selects the prefix of benign
/// section i to inject, floor(values[i] * c_i) bytes.
struct ManipulationVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  static ManipulationVector zeros(std::size_t k) { return {std::vector<double>(k, 0.0)}; }
};

enum class InjectionMode { Padding, SectionInjection };

const char* injection_mode_name(InjectionMode mode);
InjectionMode injection_mode_from_name(const std::string& name);

/// Applies the selected payloads to `x` without touching anything the loader
/// or the original code depends on.
///
/// Padding appends the concatenated payloads (ascending corpus index) to the
/// overlay; the serialized original is an exact prefix of the result.
///
/// SectionInjection appends one read-only data section per nonzero payload.
/// New raw data is placed after all existing raw data; if the grown section
/// table no longer fits under size_of_headers, the header region grows by the
/// minimal multiple of file_alignment and every original raw pointer shifts
/// by that amount. Entry point, data directories, and every original
/// section's address, size, flags and content are left untouched.
///
/// Throws ManipulationError on a length mismatch or out-of-range element and
/// pe::LayoutError if a 32-bit header field would overflow.
pe::PeFile apply(const pe::PeFile& x, const ManipulationVector& s, const PayloadCorpus& corpus,
                 InjectionMode mode);

/// Payload-size penalty: dot product of the corpus size vector with s.
double penalty(const ManipulationVector& s, const PayloadCorpus& corpus);

/// True on-disk growth between two files, structural overhead included.
std::uint64_t injected_size(const pe::PeFile& x, const pe::PeFile& x_prime);

}  // namespace gam
