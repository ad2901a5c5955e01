#include <doctest.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "wquant/errors.hpp"
#include "wquant/quantizer.hpp"
#include "wquant/storage.hpp"

using namespace wquant;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) { return fs::temp_directory_path() / name; }

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("tensor file header arithmetic") {
    TensorFile t;
    t.dtype = Dtype::F32;
    t.dims = {2, 3};
    t.values = {1, 2, 3, 4, 5, 6};
    auto path = temp_file("t23.wqt");
    write_tensor(path, t);
    CHECK(fs::file_size(path) == 47);  // 4+1+1+1 + 2*8 + 6*4

    TensorFile r = read_tensor(path);
    CHECK(r.dtype == Dtype::F32);
    CHECK(r.dims == t.dims);
    CHECK(r.values == t.values);

    auto path2 = temp_file("t23b.wqt");
    write_tensor(path2, r);
    CHECK(slurp(path) == slurp(path2));
    fs::remove(path);
    fs::remove(path2);
}

TEST_CASE("tensor read rejects malformed files") {
    auto path = temp_file("bad.wqt");
    TensorFile t;
    t.dtype = Dtype::F64;
    t.dims = {4};
    t.values = {1, 2, 3, 4};
    write_tensor(path, t);

    // truncate by one byte
    auto bytes = slurp(path);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 1));
    }
    CHECK_THROWS_AS(read_tensor(path), io_error);

    // bad magic
    bytes[0] = 'X';
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(read_tensor(path), io_error);

    CHECK_THROWS_AS(read_tensor(temp_file("does_not_exist.wqt")), io_error);
    fs::remove(path);
}

TEST_CASE("pack/unpack round trip over random cases") {
    std::mt19937_64 rng(61);
    auto path = temp_file("roundtrip.wqp");
    for (int trial = 0; trial < 60; ++trial) {
        size_t rows = std::uniform_int_distribution<size_t>(1, 20)(rng);
        size_t cols = std::uniform_int_distribution<size_t>(1, 20)(rng);
        int bits = std::uniform_int_distribution<>(2, 8)(rng);
        Scheme s = (rng() & 1) ? Scheme::Linear : Scheme::Exponential;
        Rounding r = std::array{Rounding::Floor, Rounding::Ceil,
                                Rounding::Mean}[rng() % 3];
        std::vector<double> w(rows * cols);
        for (double& x : w) x = std::normal_distribution<>(0.0, 1.0)(rng);
        QuantizedTensor q = quantize_tensor(w, {rows, cols}, s, r, bits, X0Mode::heuristic());
        pack(q, path);
        QuantizedTensor u = unpack(path);
        CHECK(u.shape == q.shape);
        CHECK(u.bits == q.bits);
        CHECK(u.scheme == q.scheme);
        CHECK(u.rounding == q.rounding);
        CHECK(u.max_abs == q.max_abs);
        CHECK(u.rescale == q.rescale);
        CHECK(u.codebook.values == q.codebook.values);
        CHECK(u.signs == q.signs);
        CHECK(u.codes == q.codes);
        CHECK(dequantize(u) == dequantize(q));
    }
    fs::remove(path);
}

TEST_CASE("packed payload sizing") {
    CHECK(packed_payload_bytes(1, 3) == 1);
    CHECK(packed_payload_bytes(1000000, 4) == 500000);
    CHECK(packed_payload_bytes(8, 5) == 5);

    std::vector<double> w{0.25};
    QuantizedTensor q = quantize_tensor(w, {1}, Scheme::Exponential, Rounding::Ceil, 3,
                                        X0Mode::explicit_value(0.5));
    auto path = temp_file("one.wqp");
    pack(q, path);
    // header 4+1+1+1+1+1 + 8 (dims) + 16 (M, rescale) + 4*8 (codebook) + 1 payload
    CHECK(fs::file_size(path) == 4 + 1 + 1 + 1 + 1 + 1 + 8 + 16 + 32 + 1);
    fs::remove(path);
}

TEST_CASE("unpack rejects corrupt packed files") {
    std::mt19937_64 rng(67);
    std::vector<double> w(64);
    for (double& x : w) x = std::normal_distribution<>(0.0, 1.0)(rng);
    QuantizedTensor q = quantize_tensor(w, {64}, Scheme::Exponential, Rounding::Ceil, 4,
                                        X0Mode::heuristic());
    auto path = temp_file("corrupt.wqp");
    pack(q, path);
    auto bytes = slurp(path);

    auto rewrite = [&](const std::vector<char>& b) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(b.data(), static_cast<std::streamsize>(b.size()));
    };
    auto truncated = bytes;
    truncated.pop_back();
    rewrite(truncated);
    CHECK_THROWS_AS(unpack(path), io_error);

    auto badver = bytes;
    badver[4] = 9;
    rewrite(badver);
    CHECK_THROWS_AS(unpack(path), io_error);
    fs::remove(path);
}

TEST_CASE("manifest json round trip") {
    std::vector<ManifestLayer> layers{{"fc1", "fc1.wqp", 0.12, 1.5, 0.03, 0.998, 6},
                                      {"fc2", "fc2.wqp", 0.08, 0.9, 0.05, 0.995, 6}};
    auto path = temp_file("manifest_test.json");
    write_manifest(path, layers);
    auto back = read_manifest(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "fc1");
    CHECK(back[0].sigma == 0.12);
    CHECK(back[1].x0 == 0.05);
    CHECK(back[1].bits == 6);
    fs::remove(path);
}
