#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wquant/partition.hpp"

namespace wquant {

struct NormalizedTensor {
    std::vector<int8_t> signs;       // -1, 0, +1
    std::vector<double> magnitudes;  // |w| / M, in [0,1]
    double max_abs = 0.0;            // M
    std::vector<size_t> shape;
    bool degenerate = false;  // M == 0, quantization is the identity
};

// Throws std::invalid_argument on an empty tensor.
NormalizedTensor normalize(std::span<const double> weights, std::vector<size_t> shape);

// Centered Pearson correlation with population (1/N) standard deviations.
// Throws std::domain_error when either array is constant or shorter than 2.
double correlation(std::span<const double> x, std::span<const double> y);

// Correlation of sign-carrying values computed from magnitudes alone:
// when x and y share symmetric signs, the centered correlation of the
// signed arrays reduces to sum(xy) / (rms_x * rms_y). Returns -inf when the
// reconstruction collapses to zero.
double signed_rho(std::span<const double> magnitudes, std::span<const double> recon);

// x0 candidates expressed in x0 / sigma_x units, log-spaced.
struct GridSpec {
    double lo = 0.02;
    double hi = 4.0;
    int points = 400;
};

struct SweepResult {
    std::vector<double> grid;          // x0 / sigma_x candidates
    std::vector<double> correlations;  // -inf marks skipped/collapsed points
    double best_x0 = 0.0;              // absolute, in [0,1] units
    double best_rho = 0.0;
    double sigma = 0.0;  // rms of the magnitudes (= std of the signed values)
};

// Quantize `magnitudes` at every grid point and record the signed
// correlation with the reconstruction; best point wins, first on ties.
// Grid points whose absolute x0 falls outside (0,1) are skipped.
SweepResult sweep_x0(std::span<const double> magnitudes, Scheme scheme, Rounding rounding,
                     int bits, GridSpec grid = {});

// x0 = (sigma / max_abs) * 2^(2-B), clamped to [1e-6, 1 - 1e-6].
double heuristic_x0(double sigma, double max_abs, int bits);

struct X0Mode {
    enum class Kind { Sweep, Heuristic, Explicit };
    Kind kind = Kind::Heuristic;
    double value = 0.0;  // for Explicit

    static X0Mode sweep() { return {Kind::Sweep, 0.0}; }
    static X0Mode heuristic() { return {Kind::Heuristic, 0.0}; }
    static X0Mode explicit_value(double x0) { return {Kind::Explicit, x0}; }
};

struct QuantizedTensor {
    std::vector<size_t> shape;
    double max_abs = 0.0;  // M
    std::vector<int8_t> signs;
    std::vector<uint8_t> codes;  // bin indices, B-1 bits each
    Codebook codebook;
    Scheme scheme = Scheme::Exponential;
    Rounding rounding = Rounding::Ceil;
    int bits = 0;       // B, including the sign bit
    double x0 = 0.0;    // derived metadata, not serialized
    double rescale = 1.0;

    size_t count() const { return codes.size(); }
};

std::vector<double> dequantize(const QuantizedTensor& q);

// Full pipeline: normalize -> resolve x0 -> partition -> bins -> codebook,
// then set `rescale` so std(dequantized) equals std(original). Degenerate
// tensors (all-zero or constant) reconstruct exactly with rescale = 1.
QuantizedTensor quantize_tensor(std::span<const double> weights, std::vector<size_t> shape,
                                Scheme scheme, Rounding rounding, int bits, X0Mode mode);

struct NamedTensor {
    std::string name;
    std::vector<size_t> shape;
    std::vector<double> values;
};

struct LayerReport {
    std::string name;
    size_t count = 0;
    bool quantized = false;
    double sigma = 0.0;    // std of the original values
    double max_abs = 0.0;  // M
    double x0 = 0.0;
    double rho = 0.0;         // sweep-convention correlation, magnitudes
    double rho_signed = 0.0;  // centered correlation, original vs dequantized
    int bits = 0;
    std::string note;  // "skipped", "degenerate", or an error message
};

struct NetworkResult {
    // One entry per input layer; nullopt means the layer passed through.
    std::vector<std::optional<QuantizedTensor>> tensors;
    std::vector<LayerReport> reports;
    double quantized_fraction = 0.0;  // of total parameter count
};

using SkipPredicate = std::function<bool(const NamedTensor&)>;

// Default skip: parameter arrays of dimensionality <= 1 (biases, scales).
SkipPredicate default_skip();

// Per-layer heuristic x0 from the layer's own sigma and M, then variance
// rescale. A layer that fails to quantize is reported and passed through.
NetworkResult quantize_network(const std::vector<NamedTensor>& layers, int bits,
                               Scheme scheme, Rounding rounding,
                               const SkipPredicate& skip = default_skip());

}  // namespace wquant
