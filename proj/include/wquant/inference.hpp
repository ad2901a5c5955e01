#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wquant/partition.hpp"
#include "wquant/quantizer.hpp"

namespace wquant {

enum class Activation { Relu, Identity, Softmax };

Activation parse_activation(const std::string& s);

struct DenseLayer {
    std::string name;
    size_t in_dim = 0, out_dim = 0;
    std::vector<double> weights;  // row-major (in_dim x out_dim)
    std::vector<double> bias;     // out_dim
    Activation act = Activation::Identity;
};

struct ToyModel {
    std::vector<DenseLayer> layers;
};

struct Dataset {
    size_t dim = 0;
    std::vector<double> inputs;  // count x dim, row-major
    std::vector<int> labels;

    size_t count() const { return labels.size(); }
    std::span<const double> input(size_t i) const { return {inputs.data() + i * dim, dim}; }
};

// Affine + activation per layer; throws std::invalid_argument on a
// dimension mismatch.
std::vector<double> forward(const ToyModel& model, std::span<const double> input);

struct EvalReport {
    double top1 = 0.0;
    int count = 0;
    std::vector<double> per_layer_rho;
};

EvalReport evaluate(const ToyModel& model, const Dataset& data);

// Quantizes the weight matrices (biases skipped), evaluates both models on
// the same data. The float model is untouched.
std::pair<EvalReport, EvalReport> compare_quantized(const ToyModel& model, const Dataset& data,
                                                    int bits, Scheme scheme, Rounding rounding);

// Apply quantize_network to a model's weight matrices.
ToyModel quantize_model(const ToyModel& model, int bits, Scheme scheme, Rounding rounding,
                        std::vector<double>* per_layer_rho = nullptr);

struct FixtureBundle {
    ToyModel model;
    Dataset dataset;
    double float_top1 = 0.0;  // recorded when the fixture was built
    int sample0_argmax = -1;
};

// Loads a fixture directory: manifest.json + TensorFiles for layers and data.
FixtureBundle load_fixture(const std::filesystem::path& manifest_path);

}  // namespace wquant
