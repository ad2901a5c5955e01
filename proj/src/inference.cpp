#include "wquant/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "wquant/errors.hpp"
#include "wquant/storage.hpp"

namespace wquant {

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "identity") return Activation::Identity;
    if (s == "softmax") return Activation::Softmax;
    throw std::domain_error("unknown activation '" + s + "'");
}

std::vector<double> forward(const ToyModel& model, std::span<const double> input) {
    std::vector<double> x(input.begin(), input.end());
    for (const DenseLayer& l : model.layers) {
        if (x.size() != l.in_dim)
            throw std::invalid_argument("dimension mismatch at layer " + l.name + ": got " +
                                        std::to_string(x.size()) + ", expected " +
                                        std::to_string(l.in_dim));
        std::vector<double> y(l.bias);
        for (size_t i = 0; i < l.in_dim; ++i) {
            const double xi = x[i];
            const double* row = l.weights.data() + i * l.out_dim;
            for (size_t j = 0; j < l.out_dim; ++j) y[j] += xi * row[j];
        }
        switch (l.act) {
            case Activation::Relu:
                for (double& v : y) v = std::max(v, 0.0);
                break;
            case Activation::Softmax: {
                double m = *std::max_element(y.begin(), y.end());
                double sum = 0.0;
                for (double& v : y) sum += (v = std::exp(v - m));
                for (double& v : y) v /= sum;
                break;
            }
            case Activation::Identity:
                break;
        }
        x = std::move(y);
    }
    return x;
}

EvalReport evaluate(const ToyModel& model, const Dataset& data) {
    if (data.count() == 0) throw std::invalid_argument("empty dataset");
    int correct = 0;
    for (size_t i = 0; i < data.count(); ++i) {
        std::vector<double> p = forward(model, data.input(i));
        int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        if (pred == data.labels[i]) ++correct;
    }
    EvalReport rep;
    rep.count = static_cast<int>(data.count());
    rep.top1 = static_cast<double>(correct) / rep.count;
    return rep;
}

ToyModel quantize_model(const ToyModel& model, int bits, Scheme scheme, Rounding rounding,
                        std::vector<double>* per_layer_rho) {
    std::vector<NamedTensor> tensors;
    for (const DenseLayer& l : model.layers) {
        tensors.push_back({l.name + "/weights", {l.in_dim, l.out_dim}, l.weights});
        tensors.push_back({l.name + "/bias", {l.bias.size()}, l.bias});
    }
    NetworkResult net = quantize_network(tensors, bits, scheme, rounding);
    ToyModel out = model;
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const auto& qt = net.tensors[2 * li];
        if (qt) out.layers[li].weights = dequantize(*qt);
        if (per_layer_rho) per_layer_rho->push_back(net.reports[2 * li].rho);
    }
    return out;
}

std::pair<EvalReport, EvalReport> compare_quantized(const ToyModel& model, const Dataset& data,
                                                    int bits, Scheme scheme, Rounding rounding) {
    EvalReport base = evaluate(model, data);
    std::vector<double> rhos;
    ToyModel qmodel = quantize_model(model, bits, scheme, rounding, &rhos);
    EvalReport quant = evaluate(qmodel, data);
    quant.per_layer_rho = std::move(rhos);
    return {base, quant};
}

FixtureBundle load_fixture(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw io_error("cannot open fixture manifest: " + manifest_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(manifest_path.string() + ": " + e.what());
    }
    const std::filesystem::path dir = manifest_path.parent_path();

    FixtureBundle fb;
    for (const auto& lj : j.at("layers")) {
        DenseLayer l;
        l.name = lj.at("name").get<std::string>();
        l.act = parse_activation(lj.at("activation").get<std::string>());
        TensorFile w = read_tensor(dir / lj.at("weights").get<std::string>());
        if (w.dims.size() != 2) throw io_error("layer " + l.name + ": weights must be 2-d");
        l.in_dim = w.dims[0];
        l.out_dim = w.dims[1];
        l.weights = std::move(w.values);
        TensorFile b = read_tensor(dir / lj.at("bias").get<std::string>());
        if (b.count() != l.out_dim) throw io_error("layer " + l.name + ": bias size mismatch");
        l.bias = std::move(b.values);
        fb.model.layers.push_back(std::move(l));
    }

    const auto& dj = j.at("dataset");
    TensorFile inputs = read_tensor(dir / dj.at("inputs").get<std::string>());
    if (inputs.dims.size() != 2) throw io_error("dataset inputs must be 2-d");
    TensorFile labels = read_tensor(dir / dj.at("labels").get<std::string>());
    if (labels.count() != inputs.dims[0]) throw io_error("dataset label count mismatch");
    fb.dataset.dim = inputs.dims[1];
    fb.dataset.inputs = std::move(inputs.values);
    fb.dataset.labels.reserve(labels.count());
    for (double v : labels.values) fb.dataset.labels.push_back(static_cast<int>(v));
    fb.float_top1 = j.at("float_top1").get<double>();
    fb.sample0_argmax = j.value("sample0_argmax", -1);
    return fb;
}

}  // namespace wquant
