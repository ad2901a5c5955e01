#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wquant/quantizer.hpp"

namespace wquant {

enum class Dtype : uint8_t { F32 = 0, F64 = 1 };

// Raw tensor container ("WQT1"): magic, version, dtype, ndim, dims (u64 LE),
// row-major little-endian payload.
struct TensorFile {
    Dtype dtype = Dtype::F64;
    std::vector<size_t> dims;
    std::vector<double> values;  // f32 payloads round-trip exactly through double

    size_t count() const;
};

// Throw io_error on malformed headers, truncation, or filesystem failures.
void write_tensor(const std::filesystem::path& path, const TensorFile& t);
TensorFile read_tensor(const std::filesystem::path& path);

// Packed quantized tensor ("WQP1"): header + codebook + B bits per weight
// (sign bit then B-1 code bits, MSB-first, zero-padded final byte).
void pack(const QuantizedTensor& q, const std::filesystem::path& path);
QuantizedTensor unpack(const std::filesystem::path& path);

// Payload bytes of a packed tensor with `count` weights at B bits.
size_t packed_payload_bytes(size_t count, int bits);

struct ManifestLayer {
    std::string name;
    std::string file;
    double sigma = 0.0;
    double max_abs = 0.0;
    double x0 = 0.0;
    double rho = 0.0;
    int bits = 0;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestLayer>& layers);
std::vector<ManifestLayer> read_manifest(const std::filesystem::path& path);

}  // namespace wquant
