// wquant: post-training weight discretization tool.
// JSON-line reports go to stdout, diagnostics to stderr.
// Exit codes: 0 ok, 1 domain error, 2 I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wquant/errors.hpp"
#include "wquant/experiments.hpp"
#include "wquant/inference.hpp"
#include "wquant/oracle.hpp"
#include "wquant/quantizer.hpp"
#include "wquant/storage.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wquant;

namespace {

int resolve_threads(int flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("WQUANT_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 0;  // modules pick hardware concurrency
}

X0Mode parse_x0_mode(const std::string& s) {
    if (s == "sweep") return X0Mode::sweep();
    if (s == "heuristic") return X0Mode::heuristic();
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::domain_error("bad --x0 value '" + s + "'");
    if (!(v > 0.0 && v < 1.0))
        throw std::domain_error("explicit x0 must lie in (0,1), got " + s);
    return X0Mode::explicit_value(v);
}

std::pair<int, int> parse_bits_range(const std::string& s) {
    auto dots = s.find("..");
    int lo, hi;
    if (dots == std::string::npos) {
        lo = hi = std::stoi(s);
    } else {
        lo = std::stoi(s.substr(0, dots));
        hi = std::stoi(s.substr(dots + 2));
    }
    if (lo < 2 || hi > 8 || lo > hi)
        throw std::domain_error("bits range must lie within 2..8, got '" + s + "'");
    return {lo, hi};
}

double pop_std(std::span<const double> v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double acc = 0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

json tensor_report(const std::string& name, const QuantizedTensor& q,
                   std::span<const double> original, const fs::path& file) {
    std::vector<double> mags(original.size()), rmags(original.size());
    for (size_t i = 0; i < original.size(); ++i) {
        mags[i] = q.max_abs > 0 ? std::fabs(original[i]) / q.max_abs : 0.0;
        rmags[i] = q.codebook.values[q.codes[i]];
    }
    double file_bytes = static_cast<double>(fs::file_size(file));
    json j = {{"name", name},
              {"file", file.string()},
              {"bits", q.bits},
              {"scheme", to_string(q.scheme)},
              {"rounding", to_string(q.rounding)},
              {"count", q.count()},
              {"sigma", pop_std(original)},
              {"M", q.max_abs},
              {"x0", q.x0},
              {"rho", signed_rho(mags, rmags)},
              {"rescale", q.rescale},
              {"payload_ratio", 32.0 / q.bits},
              {"file_ratio", 4.0 * static_cast<double>(q.count()) / file_bytes}};
    return j;
}

int cmd_quantize(const std::string& in, int bits, const std::string& scheme_s,
                 const std::string& rounding_s, const std::string& x0_s,
                 const std::string& out) {
    Scheme scheme = parse_scheme(scheme_s);
    Rounding rounding = parse_rounding(rounding_s);
    X0Mode mode = parse_x0_mode(x0_s);

    if (fs::path(in).extension() == ".json") {
        // network bundle: quantize every weight matrix, emit files + manifest
        FixtureBundle fb = load_fixture(in);
        fs::path out_dir(out);
        fs::create_directories(out_dir);
        std::vector<ManifestLayer> manifest;
        for (const DenseLayer& l : fb.model.layers) {
            QuantizedTensor q = quantize_tensor(l.weights, {l.in_dim, l.out_dim}, scheme,
                                                rounding, bits, mode);
            fs::path file = out_dir / (l.name + ".wqp");
            pack(q, file);
            json rep = tensor_report(l.name, q, l.weights, file);
            std::cout << rep.dump() << "\n";
            manifest.push_back({l.name, file.filename().string(), rep["sigma"], q.max_abs,
                                q.x0, rep["rho"], bits});
        }
        write_manifest(out_dir / "manifest.json", manifest);
        return 0;
    }

    TensorFile t = read_tensor(in);
    QuantizedTensor q = quantize_tensor(t.values, t.dims, scheme, rounding, bits, mode);
    pack(q, out);
    std::cout << tensor_report(fs::path(in).stem().string(), q, t.values, out).dump() << "\n";
    return 0;
}

int cmd_sweep(const std::string& in, int bits, const std::string& scheme_s,
              const std::string& rounding_s, const std::string& csv) {
    TensorFile t = read_tensor(in);
    NormalizedTensor nt = normalize(t.values, t.dims);
    SweepResult r = sweep_x0(nt.magnitudes, parse_scheme(scheme_s), parse_rounding(rounding_s),
                             bits);
    if (!csv.empty()) {
        std::ofstream out(csv, std::ios::binary);
        if (!out) throw io_error("cannot open for writing: " + csv);
        out << "x0_over_sigma,x0,rho\n";
        char buf[128];
        for (size_t i = 0; i < r.grid.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", r.grid[i],
                          r.grid[i] * r.sigma, r.correlations[i]);
            out << buf;
        }
    }
    json j = {{"best_x0", r.best_x0},
              {"best_x0_over_sigma", r.best_x0 / r.sigma},
              {"best_rho", r.best_rho},
              {"sigma", r.sigma}};
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_experiment(const std::string& dist_s, const std::string& bits_s, int trials,
                   uint64_t seed, const std::string& csv, int threads) {
    auto [lo, hi] = parse_bits_range(bits_s);
    std::vector<int> bits;
    for (int b = lo; b <= hi; ++b) bits.push_back(b);
    std::vector<TrialStats> stats =
        run_table_experiment(parse_dist(dist_s), 1.0, bits, trials, seed, threads);
    emit_csv(stats, csv);
    json j = {{"csv", csv}, {"rows", stats.size()}, {"trials", trials}, {"seed", seed}};
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, int bits, const std::string& scheme_s,
             const std::string& rounding_s) {
    FixtureBundle fb = load_fixture(model_path);
    if (bits == 0) {
        EvalReport rep = evaluate(fb.model, fb.dataset);
        json j = {{"float_top1", rep.top1}, {"count", rep.count}};
        std::cout << j.dump() << "\n";
        return 0;
    }
    auto [base, quant] = compare_quantized(fb.model, fb.dataset, bits,
                                           parse_scheme(scheme_s), parse_rounding(rounding_s));
    json j = {{"float_top1", base.top1},
              {"quantized_top1", quant.top1},
              {"count", base.count},
              {"bits", bits},
              {"scheme", scheme_s},
              {"rounding", rounding_s},
              {"per_layer_rho", quant.per_layer_rho}};
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_info(const std::string& in) {
    QuantizedTensor q = unpack(in);
    json j = {{"bits", q.bits},
              {"scheme", to_string(q.scheme)},
              {"rounding", to_string(q.rounding)},
              {"shape", q.shape},
              {"count", q.count()},
              {"M", q.max_abs},
              {"rescale", q.rescale},
              {"codebook", q.codebook.values},
              {"payload_bytes", packed_payload_bytes(q.count(), q.bits)}};
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_unpack(const std::string& in, const std::string& out, const std::string& dtype_s) {
    QuantizedTensor q = unpack(in);
    TensorFile t;
    t.dtype = dtype_s == "f32" ? Dtype::F32 : Dtype::F64;
    t.dims = q.shape;
    t.values = dequantize(q);
    write_tensor(out, t);
    json j = {{"file", out}, {"count", t.count()}};
    std::cout << j.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"post-training weight discretization toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker thread cap (WQUANT_THREADS as fallback)");

    std::string in, out, csv, model_path;
    std::string scheme = "exponential", rounding = "ceil", x0 = "heuristic";
    std::string dist = "laplacian", bits_range = "2..6", dtype = "f64";
    int bits = 0, trials = 20;
    uint64_t seed = 12345;

    auto* q = app.add_subcommand("quantize", "quantize a tensor or network bundle");
    q->add_option("--in", in, "input .wqt tensor or bundle manifest .json")->required();
    q->add_option("--bits", bits, "total bit width incl. sign")->required();
    q->add_option("--scheme", scheme, "linear|exponential");
    q->add_option("--rounding", rounding, "floor|ceil|mean");
    q->add_option("--x0", x0, "sweep|heuristic|<float in (0,1)>");
    q->add_option("--out", out, "output .wqp file (or directory for bundles)")->required();

    auto* pk = app.add_subcommand("pack", "pack a tensor with an explicit x0");
    pk->add_option("--in", in)->required();
    pk->add_option("--bits", bits)->required();
    pk->add_option("--scheme", scheme);
    pk->add_option("--rounding", rounding);
    pk->add_option("--x0", x0, "explicit x0 in (0,1)")->required();
    pk->add_option("--out", out)->required();

    auto* up = app.add_subcommand("unpack", "dequantize a packed file to a tensor");
    up->add_option("--in", in)->required();
    up->add_option("--out", out)->required();
    up->add_option("--dtype", dtype, "f32|f64");

    auto* sw = app.add_subcommand("sweep", "emit the correlation-vs-x0 curve");
    sw->add_option("--in", in)->required();
    sw->add_option("--bits", bits)->required();
    sw->add_option("--scheme", scheme);
    sw->add_option("--rounding", rounding);
    sw->add_option("--csv", csv, "curve output path");

    auto* ex = app.add_subcommand("experiment", "synthetic-distribution table runs");
    ex->add_option("--dist", dist, "laplacian|gaussian");
    ex->add_option("--bits", bits_range, "range, e.g. 2..6");
    ex->add_option("--trials", trials);
    ex->add_option("--seed", seed);
    ex->add_option("--csv", csv)->required();

    auto* ev = app.add_subcommand("eval", "evaluate a network bundle");
    ev->add_option("--model", model_path, "bundle manifest .json")->required();
    ev->add_option("--bits", bits, "also evaluate quantized at this width");
    ev->add_option("--scheme", scheme);
    ev->add_option("--rounding", rounding);

    auto* inf = app.add_subcommand("info", "print a packed file header");
    inf->add_option("--in", in)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (q->parsed()) return cmd_quantize(in, bits, scheme, rounding, x0, out);
        if (pk->parsed()) {
            if (x0 == "sweep" || x0 == "heuristic")
                throw std::domain_error("pack requires an explicit --x0 value");
            return cmd_quantize(in, bits, scheme, rounding, x0, out);
        }
        if (up->parsed()) return cmd_unpack(in, out, dtype);
        if (sw->parsed()) return cmd_sweep(in, bits, scheme, rounding, csv);
        if (ex->parsed()) return cmd_experiment(dist, bits_range, trials, seed, csv,
                                                resolve_threads(threads));
        if (ev->parsed()) return cmd_eval(model_path, bits, scheme, rounding);
        if (inf->parsed()) return cmd_info(in);
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
