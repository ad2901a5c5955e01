#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "wquant/inference.hpp"

using namespace wquant;

namespace {

const char* fixture_path() { return std::getenv("WQUANT_FIXTURE"); }

ToyModel identity_model(size_t dim, std::vector<double> bias,
                        Activation act = Activation::Identity) {
    DenseLayer l;
    l.name = "id";
    l.in_dim = l.out_dim = dim;
    l.weights.assign(dim * dim, 0.0);
    for (size_t i = 0; i < dim; ++i) l.weights[i * dim + i] = 1.0;
    l.bias = std::move(bias);
    l.act = act;
    ToyModel m;
    m.layers.push_back(std::move(l));
    return m;
}

}  // namespace

TEST_CASE("identity layer adds the bias") {
    ToyModel m = identity_model(3, {0.5, -1.0, 2.0});
    std::vector<double> out = forward(m, std::vector<double>{1, 2, 3});
    CHECK(out == std::vector<double>{1.5, 1.0, 5.0});
}

TEST_CASE("softmax of zeros is uniform and sums to one") {
    ToyModel m = identity_model(4, {0, 0, 0, 0}, Activation::Softmax);
    std::vector<double> out = forward(m, std::vector<double>{0, 0, 0, 0});
    double sum = 0;
    for (double v : out) {
        CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("dimension mismatch throws") {
    ToyModel m = identity_model(3, {0, 0, 0});
    CHECK_THROWS_AS(forward(m, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST_CASE("fixture bundle evaluates as recorded") {
    const char* path = fixture_path();
    REQUIRE_MESSAGE(path, "WQUANT_FIXTURE must point at the toy MLP manifest");
    FixtureBundle fb = load_fixture(path);
    REQUIRE(fb.model.layers.size() >= 2);
    REQUIRE(fb.dataset.count() >= 1000);

    EvalReport rep = evaluate(fb.model, fb.dataset);
    CHECK(rep.top1 >= 0.90);
    CHECK(rep.top1 == doctest::Approx(fb.float_top1).epsilon(0.002));

    std::vector<double> p = forward(fb.model, fb.dataset.input(0));
    int argmax = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    CHECK(argmax == fb.sample0_argmax);

    // repeated evaluation is deterministic
    CHECK(evaluate(fb.model, fb.dataset).top1 == rep.top1);
}

TEST_CASE("compare_quantized leaves the float model untouched") {
    const char* path = fixture_path();
    REQUIRE(path);
    FixtureBundle fb = load_fixture(path);
    EvalReport before = evaluate(fb.model, fb.dataset);
    auto [base, quant] = compare_quantized(fb.model, fb.dataset, 6, Scheme::Exponential,
                                           Rounding::Ceil);
    EvalReport after = evaluate(fb.model, fb.dataset);
    CHECK(before.top1 == after.top1);
    CHECK(base.top1 == before.top1);
    CHECK(quant.per_layer_rho.size() == fb.model.layers.size());
    for (double r : quant.per_layer_rho) CHECK(r >= 0.99);
    CHECK(quant.top1 >= base.top1 - 0.01);
}

TEST_CASE("8-bit quantization rarely flips decisions") {
    const char* path = fixture_path();
    REQUIRE(path);
    FixtureBundle fb = load_fixture(path);
    ToyModel q = quantize_model(fb.model, 8, Scheme::Exponential, Rounding::Mean);
    int stable = 0;
    const size_t count = fb.dataset.count();
    for (size_t i = 0; i < count; ++i) {
        std::vector<double> pf = forward(fb.model, fb.dataset.input(i));
        std::vector<double> pq = forward(q, fb.dataset.input(i));
        // runner-up margin of the float decision, in log-probability units
        std::vector<double> lf(pf.size()), lq(pq.size());
        for (size_t j = 0; j < pf.size(); ++j) {
            lf[j] = std::log(pf[j]);
            lq[j] = std::log(pq[j]);
        }
        size_t top = std::max_element(lf.begin(), lf.end()) - lf.begin();
        double second = -1e300;
        for (size_t j = 0; j < lf.size(); ++j)
            if (j != top) second = std::max(second, lf[j]);
        double margin = lf[top] - second;
        double max_delta = 0;
        for (size_t j = 0; j < lf.size(); ++j)
            max_delta = std::max(max_delta, std::fabs(lq[j] - lf[j]));
        if (max_delta < margin) ++stable;
    }
    CHECK(static_cast<double>(stable) / count >= 0.95);
}
