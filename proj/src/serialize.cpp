#include "sgsr/serialize.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "sgsr/error.hpp"

namespace sgsr {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'G', 'T', '1'};
constexpr std::uint32_t kMaxRank = 16;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw FormatError("SGT1: truncated record");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

std::uint64_t write_sgt(std::ostream& out, const Tensor& t) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) put_le<std::uint64_t>(out, e);
  for (double v : t.data()) put_le<double>(out, v);
  if (!out) throw IoError("SGT1: write failed");
  return 4 + 4 + 8 * t.rank() + 8 * t.numel();
}

Tensor read_sgt(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size())) throw FormatError("SGT1: truncated magic");
  if (magic != kMagic) throw FormatError("SGT1: bad magic bytes");
  const auto rank = get_le<std::uint32_t>(in);
  if (rank == 0 || rank > kMaxRank) throw FormatError("SGT1: implausible rank " + std::to_string(rank));
  Shape shape(rank);
  std::uint64_t numel = 1;
  for (auto& e : shape) {
    const auto v = get_le<std::uint64_t>(in);
    if (v == 0 || v > (std::uint64_t(1) << 40)) throw FormatError("SGT1: implausible extent");
    e = static_cast<std::size_t>(v);
    numel *= v;
    if (numel > (std::uint64_t(1) << 40)) throw FormatError("SGT1: implausible element count");
  }
  std::vector<double> values(numel);
  for (auto& v : values) v = get_le<double>(in);
  return Tensor(std::move(shape), std::move(values));
}

std::vector<std::uint64_t> save_tensors(const std::filesystem::path& path,
                                        const std::vector<Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::vector<std::uint64_t> offsets;
  std::uint64_t off = 0;
  for (const auto& t : tensors) {
    offsets.push_back(off);
    off += write_sgt(out, t);
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
  return offsets;
}

std::vector<Tensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Tensor> out;
  while (in.peek() != std::char_traits<char>::eof()) out.push_back(read_sgt(in));
  return out;
}

}  // namespace sgsr
