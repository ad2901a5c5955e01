#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "wquant/quantizer.hpp"

using namespace wquant;

namespace {

std::vector<double> laplacian(size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::vector<double> out(n);
    std::uniform_real_distribution<double> ud(1e-12, 1.0 - 1e-12);
    for (double& x : out) {
        double u = ud(rng);
        x = (u < 0.5) ? scale * std::log(2 * u) : -scale * std::log(2 * (1 - u));
    }
    return out;
}

double pop_std(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= v.size();
    double acc = 0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / v.size());
}

}  // namespace

TEST_CASE("normalize basics") {
    std::vector<double> w{-2, 1, 0, 4};
    NormalizedTensor t = normalize(w, {4});
    CHECK(t.max_abs == 4.0);
    CHECK(t.signs == std::vector<int8_t>{-1, 1, 0, 1});
    CHECK(t.magnitudes == std::vector<double>{0.5, 0.25, 0.0, 1.0});
    CHECK_FALSE(t.degenerate);

    NormalizedTensor z = normalize(std::vector<double>{0, 0, 0}, {3});
    CHECK(z.degenerate);
    CHECK(z.max_abs == 0.0);

    CHECK_THROWS_AS(normalize(std::vector<double>{}, {0}), std::invalid_argument);
}

TEST_CASE("normalize round-trips the input") {
    std::mt19937_64 rng(3);
    std::vector<double> w = laplacian(300, rng, 2.0);
    NormalizedTensor t = normalize(w, {300});
    for (size_t i = 0; i < w.size(); ++i)
        CHECK(t.signs[i] * t.magnitudes[i] * t.max_abs == doctest::Approx(w[i]).epsilon(1e-15));
    double mx = 0;
    for (double m : t.magnitudes) mx = std::max(mx, m);
    CHECK(mx == 1.0);
}

TEST_CASE("correlation basics") {
    std::vector<double> x{1, 2, 3, 4};
    CHECK(correlation(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> nx{-1, -2, -3, -4};
    CHECK(correlation(x, nx) == doctest::Approx(-1.0).epsilon(1e-12));
    std::vector<double> y{1, 1, 3, 3};
    CHECK(correlation(x, y) == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-12));
    std::vector<double> c{2, 2, 2, 2};
    CHECK_THROWS_AS(correlation(x, c), std::domain_error);
}

TEST_CASE("correlation is invariant under positive affine maps") {
    std::mt19937_64 rng(5);
    std::vector<double> x = laplacian(200, rng), y = laplacian(200, rng);
    double base = correlation(x, y);
    std::vector<double> y2(y.size());
    for (size_t i = 0; i < y.size(); ++i) y2[i] = 3.7 * y[i] - 0.4;
    CHECK(correlation(x, y2) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("mean-rounding identity: rho equals sigma_y / sigma_x") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> w = laplacian(2000, rng);
        NormalizedTensor t = normalize(w, {w.size()});
        double x0 = std::uniform_real_distribution<>(0.02, 0.6)(rng);
        int n = 1 << std::uniform_int_distribution<>(1, 5)(rng);
        Scheme s = (rng() & 1) ? Scheme::Linear : Scheme::Exponential;
        Partition p = make_partition(s, x0, n);
        auto bins = assign_bins(t.magnitudes, p);
        Codebook cb = build_codebook(t.magnitudes, bins, p, Rounding::Mean);
        std::vector<double> y(bins.size());
        for (size_t i = 0; i < bins.size(); ++i) y[i] = cb.values[bins[i]];
        double rho = correlation(t.magnitudes, y);
        CHECK(rho == doctest::Approx(pop_std(y) / pop_std(t.magnitudes)).epsilon(1e-10));
    }
}

TEST_CASE("sweep is exact on data the partition reconstructs") {
    // four distinct values, mean rounding: any partition separating them
    // reproduces the data exactly, so the sweep optimum is rho = 1
    std::vector<double> mags;
    for (double v : {0.1, 0.3, 0.6, 1.0})
        for (int k = 0; k < 5; ++k) mags.push_back(v);
    SweepResult r = sweep_x0(mags, Scheme::Exponential, Rounding::Mean, 3);
    CHECK(r.best_rho == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sweep optimum is nondecreasing in bit width") {
    std::mt19937_64 rng(17);
    std::vector<double> w = laplacian(10000, rng);
    NormalizedTensor t = normalize(w, {w.size()});
    for (Rounding rd : {Rounding::Mean, Rounding::Ceil, Rounding::Floor}) {
        double prev = -1.0;
        for (int b = 2; b <= 7; ++b) {
            SweepResult r = sweep_x0(t.magnitudes, Scheme::Exponential, rd, b);
            CHECK(r.best_rho >= prev - 1e-3);
            prev = r.best_rho;
        }
    }
}

TEST_CASE("heuristic x0") {
    CHECK(heuristic_x0(0.25, 1.0, 4) == doctest::Approx(0.0625).epsilon(1e-15));
    CHECK(heuristic_x0(0.5, 1.0, 2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(heuristic_x0(2.0, 4.0, 3) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(heuristic_x0(0.0, 1.0, 4), std::domain_error);
    CHECK_THROWS_AS(heuristic_x0(1.0, 0.0, 4), std::domain_error);
    // clamped into (0,1)
    CHECK(heuristic_x0(1e-9, 1.0, 8) == doctest::Approx(1e-6));
}

TEST_CASE("quantize_tensor hand trace") {
    std::vector<double> w{-1, -0.5, 0.5, 1};
    QuantizedTensor q = quantize_tensor(w, {4}, Scheme::Exponential, Rounding::Floor, 2,
                                        X0Mode::explicit_value(0.6));
    CHECK(q.codes == std::vector<uint8_t>{1, 0, 0, 1});
    CHECK(q.codebook.values == std::vector<double>{0.0, 0.6});
    std::vector<double> deq = dequantize(q);
    std::vector<double> expected{-0.6, 0.0, 0.0, 0.6};
    for (size_t i = 0; i < 4; ++i)
        CHECK(deq[i] / q.rescale == doctest::Approx(expected[i]).epsilon(1e-12));
    // rescale restores the original dispersion
    CHECK(pop_std(deq) == doctest::Approx(pop_std(w)).epsilon(1e-12));
}

TEST_CASE("quantize_tensor is deterministic") {
    std::mt19937_64 rng(23);
    std::vector<double> w = laplacian(1000, rng);
    QuantizedTensor a = quantize_tensor(w, {1000}, Scheme::Exponential, Rounding::Mean, 5,
                                        X0Mode::sweep());
    QuantizedTensor b = quantize_tensor(w, {1000}, Scheme::Exponential, Rounding::Mean, 5,
                                        X0Mode::sweep());
    CHECK(a.codes == b.codes);
    CHECK(a.codebook.values == b.codebook.values);
    CHECK(a.x0 == b.x0);
    CHECK(a.rescale == b.rescale);
}

TEST_CASE("quantize_tensor errors and degenerate cases") {
    std::vector<double> w{1, 2, 3};
    CHECK_THROWS_AS(quantize_tensor(w, {3}, Scheme::Linear, Rounding::Mean, 1,
                                    X0Mode::heuristic()),
                    std::domain_error);
    CHECK_THROWS_AS(quantize_tensor(w, {3}, Scheme::Linear, Rounding::Mean, 4,
                                    X0Mode::explicit_value(1.5)),
                    std::domain_error);

    std::vector<double> zeros{0, 0, 0, 0};
    QuantizedTensor qz = quantize_tensor(zeros, {4}, Scheme::Exponential, Rounding::Ceil, 4,
                                         X0Mode::heuristic());
    CHECK(dequantize(qz) == zeros);
    CHECK(qz.rescale == 1.0);

    std::vector<double> konst{0.7, 0.7, 0.7};
    QuantizedTensor qc = quantize_tensor(konst, {3}, Scheme::Exponential, Rounding::Floor, 3,
                                         X0Mode::heuristic());
    std::vector<double> deq = dequantize(qc);
    for (double v : deq) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(qc.rescale == 1.0);
}

TEST_CASE("high bit width sweep keeps correlation high") {
    std::mt19937_64 rng(29);
    std::vector<double> w = laplacian(5000, rng);
    QuantizedTensor q = quantize_tensor(w, {5000}, Scheme::Exponential, Rounding::Mean, 8,
                                        X0Mode::sweep());
    CHECK(correlation(w, dequantize(q)) >= 0.995);
}

TEST_CASE("quantize_network skips small tensors and reports fractions") {
    std::mt19937_64 rng(31);
    std::vector<NamedTensor> layers;
    layers.push_back({"fc1/w", {40, 50}, laplacian(2000, rng)});
    layers.push_back({"fc1/b", {50}, laplacian(50, rng)});
    layers.push_back({"fc2/w", {50, 30}, laplacian(1500, rng)});
    layers.push_back({"fc2/b", {30}, laplacian(30, rng)});
    NetworkResult res = quantize_network(layers, 6, Scheme::Exponential, Rounding::Ceil);
    REQUIRE(res.reports.size() == 4);
    CHECK(res.tensors[0].has_value());
    CHECK_FALSE(res.tensors[1].has_value());
    CHECK(res.reports[1].note == "skipped");
    CHECK(res.reports[0].rho >= 0.99);
    CHECK(res.reports[2].rho >= 0.99);
    CHECK(res.quantized_fraction == doctest::Approx(3500.0 / 3580.0).epsilon(1e-12));
}

TEST_CASE("quantize_network passes a bias-only network through untouched") {
    std::vector<NamedTensor> layers{{"b1", {5}, {1, 2, 3, 4, 5}},
                                    {"b2", {3}, {0.1, 0.2, 0.3}}};
    NetworkResult res = quantize_network(layers, 4, Scheme::Linear, Rounding::Floor,
                                         [](const NamedTensor&) { return true; });
    for (const auto& t : res.tensors) CHECK_FALSE(t.has_value());
    CHECK(res.quantized_fraction == 0.0);
}

TEST_CASE("quantize_network reports degenerate layers instead of failing") {
    std::vector<NamedTensor> layers{{"dead/w", {2, 2}, {0, 0, 0, 0}},
                                    {"live/w", {2, 2}, {0.5, -1.0, 0.25, 2.0}}};
    NetworkResult res = quantize_network(layers, 4, Scheme::Exponential, Rounding::Mean);
    CHECK_FALSE(res.tensors[0].has_value());
    CHECK(res.reports[0].note == "degenerate");
    CHECK(res.tensors[1].has_value());
}
