#include "uq/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "uq/error.hpp"

namespace uq {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'S', 'R'};

}  // namespace

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xffu));
}

void put_f32_le(std::vector<std::uint8_t>& out, float v) {
  put_u32_le(out, std::bit_cast<std::uint32_t>(v));
}

std::uint32_t get_u32_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw Error(ErrorKind::parse, "unexpected end of data");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

float get_f32_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return std::bit_cast<float>(get_u32_le(bytes, offset));
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4 * t.ndim() + 4 * t.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32_le(out, kTensorFileVersion);
  put_u32_le(out, static_cast<std::uint32_t>(t.ndim()));
  for (auto e : t.shape()) put_u32_le(out, static_cast<std::uint32_t>(e));
  for (double v : t.data()) put_f32_le(out, static_cast<float>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::parse, "not an NTSR tensor (bad magic)");
  }
  const auto version = get_u32_le(bytes, 4);
  if (version != kTensorFileVersion) {
    throw Error(ErrorKind::version, "unsupported NTSR version " + std::to_string(version));
  }
  const auto ndim = get_u32_le(bytes, 8);
  if (ndim == 0 || ndim > 16) throw Error(ErrorKind::parse, "NTSR ndim out of range");
  Shape shape(ndim);
  std::size_t offset = 12;
  for (auto& e : shape) {
    e = get_u32_le(bytes, offset);
    offset += 4;
  }
  const auto count = element_count(shape);
  if (bytes.size() != offset + 4 * count) {
    throw Error(ErrorKind::parse, "NTSR payload size does not match shape " + shape_string(shape));
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = get_f32_le(bytes, offset + 4 * i);
  return Tensor(std::move(shape), std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::io, "read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

Tensor read_tensor_file(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path)); }

void write_tensor_file(const std::filesystem::path& path, const Tensor& t) {
  write_file_bytes(path, encode_tensor(t));
}

}  // namespace uq
