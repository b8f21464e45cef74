#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uq/tensor.hpp"

namespace uq {

inline constexpr std::uint32_t kTensorFileVersion = 1;

/// Serialize to the NTSR container: "NTSR", u32 version, u32 ndim,
/// ndim x u32 extents, then float32 payload; all little-endian.
/// Values are narrowed to float32.
std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

Tensor read_tensor_file(const std::filesystem::path& path);
void write_tensor_file(const std::filesystem::path& path, const Tensor& t);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Little-endian helpers shared with the weight blob codec.
void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32_le(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32_le(std::span<const std::uint8_t> bytes, std::size_t offset);
float get_f32_le(std::span<const std::uint8_t> bytes, std::size_t offset);

}  // namespace uq
