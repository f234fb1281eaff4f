#pragma once

// SGT1 tensor container.
//
// One record is:
//   bytes 0..3   magic "SGT1"
//   u32          rank (little-endian)
//   u64 x rank   extents (little-endian)
//   f64 x numel  payload, row-major, IEEE-754 little-endian
// A container file is a plain concatenation of records.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "sgsr/tensor.hpp"

namespace sgsr {

/// Writes one record; returns the number of bytes written.
std::uint64_t write_sgt(std::ostream& out, const Tensor& t);
/// Reads one record. Throws FormatError on bad magic or truncation.
Tensor read_sgt(std::istream& in);

/// Writes all tensors to `path`; returns the byte offset of each record.
std::vector<std::uint64_t> save_tensors(const std::filesystem::path& path,
                                        const std::vector<Tensor>& tensors);
/// Reads every record in `path`. All-or-nothing: throws FormatError on any
/// corrupt or truncated record.
std::vector<Tensor> load_tensors(const std::filesystem::path& path);

}  // namespace sgsr
