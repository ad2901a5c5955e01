#include "wquant/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace wquant {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pop_std(std::span<const double> v) {
    double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

bool all_equal(std::span<const double> v) {
    for (double x : v)
        if (x != v.front()) return false;
    return true;
}

}  // namespace

NormalizedTensor normalize(std::span<const double> weights, std::vector<size_t> shape) {
    if (weights.empty()) throw std::invalid_argument("cannot normalize an empty tensor");
    NormalizedTensor t;
    t.shape = std::move(shape);
    t.signs.resize(weights.size());
    t.magnitudes.resize(weights.size());
    double m = 0.0;
    for (double w : weights) m = std::max(m, std::fabs(w));
    t.max_abs = m;
    t.degenerate = (m == 0.0);
    for (size_t i = 0; i < weights.size(); ++i) {
        double w = weights[i];
        t.signs[i] = (w > 0.0) ? 1 : (w < 0.0 ? -1 : 0);
        t.magnitudes[i] = t.degenerate ? 0.0 : std::fabs(w) / m;
    }
    return t;
}

double correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::domain_error("correlation needs two equal-length arrays of size >= 2");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    double vx = sxx / n - (sx / n) * (sx / n);
    double vy = syy / n - (sy / n) * (sy / n);
    if (vx <= 0.0 || vy <= 0.0)
        throw std::domain_error("correlation undefined for a constant array");
    return (sxy / n - (sx / n) * (sy / n)) / std::sqrt(vx * vy);
}

double signed_rho(std::span<const double> magnitudes, std::span<const double> recon) {
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < magnitudes.size(); ++i) {
        sxy += magnitudes[i] * recon[i];
        sxx += magnitudes[i] * magnitudes[i];
        syy += recon[i] * recon[i];
    }
    if (sxx <= 0.0 || syy <= 0.0) return kNegInf;
    return sxy / std::sqrt(sxx * syy);
}

SweepResult sweep_x0(std::span<const double> magnitudes, Scheme scheme, Rounding rounding,
                     int bits, GridSpec grid) {
    if (bits < 2) throw std::domain_error("bit width must be >= 2");
    if (magnitudes.empty()) throw std::invalid_argument("sweep over an empty array");
    const int n = 1 << (bits - 1);
    const size_t N = magnitudes.size();

    // Sorted copy + prefix sums make each grid point O(n log N): every bin is
    // a contiguous run of the sorted array, so the correlation follows from
    // per-bin counts and magnitude sums alone.
    std::vector<double> sorted(magnitudes.begin(), magnitudes.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> s1(N + 1, 0.0), s2(N + 1, 0.0);
    for (size_t i = 0; i < N; ++i) {
        s1[i + 1] = s1[i] + sorted[i];
        s2[i + 1] = s2[i] + sorted[i] * sorted[i];
    }
    const double sxx = s2[N];
    const double sigma = std::sqrt(sxx / static_cast<double>(N));

    SweepResult res;
    res.sigma = sigma;
    res.grid.resize(grid.points);
    res.correlations.assign(grid.points, kNegInf);
    const double log_lo = std::log(grid.lo), log_hi = std::log(grid.hi);
    std::vector<size_t> seg(n + 1);
    res.best_rho = kNegInf;
    res.best_x0 = 0.0;

    for (int j = 0; j < grid.points; ++j) {
        double g = std::exp(log_lo + (log_hi - log_lo) * j / (grid.points - 1));
        res.grid[j] = g;
        double x0 = g * sigma;
        if (!(x0 > 0.0 && x0 < 1.0)) continue;
        Partition p = make_partition(scheme, x0, n);
        seg[0] = 0;  // bin 0 takes everything <= boundaries[1], including 0
        for (int i = 1; i <= n; ++i) {
            seg[i] = std::upper_bound(sorted.begin(), sorted.end(), p.boundaries[i]) -
                     sorted.begin();
        }
        seg[n] = N;
        double sxy = 0.0, syy = 0.0;
        for (int i = 0; i < n; ++i) {
            size_t lo = seg[i], hi = seg[i + 1];
            double v;
            switch (rounding) {
                case Rounding::Floor: v = p.boundaries[i]; break;
                case Rounding::Ceil: v = p.boundaries[i + 1]; break;
                default:
                    if (hi == lo) continue;  // empty bin contributes nothing
                    v = (s1[hi] - s1[lo]) / static_cast<double>(hi - lo);
            }
            sxy += v * (s1[hi] - s1[lo]);
            syy += v * v * static_cast<double>(hi - lo);
        }
        if (sxx <= 0.0 || syy <= 0.0) continue;  // collapsed reconstruction
        double rho = sxy / std::sqrt(sxx * syy);
        res.correlations[j] = rho;
        if (rho > res.best_rho) {
            res.best_rho = rho;
            res.best_x0 = x0;
        }
    }
    if (res.best_rho == kNegInf)
        throw std::domain_error("sweep found no valid x0 (degenerate magnitudes)");
    return res;
}

double heuristic_x0(double sigma, double max_abs, int bits) {
    if (!(sigma > 0.0)) throw std::domain_error("heuristic x0 needs sigma > 0");
    if (!(max_abs > 0.0)) throw std::domain_error("heuristic x0 needs M > 0");
    double x0 = sigma / max_abs * std::exp2(2 - bits);
    return std::clamp(x0, 1e-6, 1.0 - 1e-6);
}

std::vector<double> dequantize(const QuantizedTensor& q) {
    std::vector<double> out(q.codes.size());
    for (size_t i = 0; i < q.codes.size(); ++i)
        out[i] = q.signs[i] * q.codebook.values[q.codes[i]] * q.max_abs * q.rescale;
    return out;
}

QuantizedTensor quantize_tensor(std::span<const double> weights, std::vector<size_t> shape,
                                Scheme scheme, Rounding rounding, int bits, X0Mode mode) {
    if (bits < 2 || bits > 8) throw std::domain_error("bit width must be in [2,8]");
    NormalizedTensor nt = normalize(weights, std::move(shape));
    const int n = 1 << (bits - 1);

    QuantizedTensor q;
    q.shape = nt.shape;
    q.max_abs = nt.max_abs;
    q.signs = std::move(nt.signs);
    // canonical sign for zero weights, so packed round-trips are bit-exact
    for (int8_t& s : q.signs)
        if (s == 0) s = 1;
    q.scheme = scheme;
    q.rounding = rounding;
    q.bits = bits;
    q.rescale = 1.0;

    const bool constant_mags = !nt.degenerate && all_equal(nt.magnitudes);
    if (nt.degenerate || constant_mags) {
        // All-zero or constant-magnitude tensor: reconstruct it exactly.
        q.x0 = 0.5;
        Partition p = make_partition(scheme, q.x0, n);
        uint8_t code = nt.degenerate ? 0 : static_cast<uint8_t>(n - 1);
        q.codes.assign(weights.size(), code);
        std::vector<int> bins(weights.size(), code);
        q.codebook = build_codebook(nt.magnitudes, bins, p, rounding);
        if (constant_mags) q.codebook.values[n - 1] = 1.0;
        return q;
    }

    switch (mode.kind) {
        case X0Mode::Kind::Sweep:
            q.x0 = sweep_x0(nt.magnitudes, scheme, rounding, bits).best_x0;
            break;
        case X0Mode::Kind::Heuristic:
            q.x0 = heuristic_x0(pop_std(weights), nt.max_abs, bits);
            break;
        case X0Mode::Kind::Explicit:
            if (!(mode.value > 0.0 && mode.value < 1.0))
                throw std::domain_error("explicit x0 must lie in (0,1)");
            q.x0 = mode.value;
            break;
    }

    Partition p = make_partition(scheme, q.x0, n);
    std::vector<int> bins = assign_bins(nt.magnitudes, p);
    q.codebook = build_codebook(nt.magnitudes, bins, p, rounding);
    q.codes.resize(bins.size());
    for (size_t i = 0; i < bins.size(); ++i) q.codes[i] = static_cast<uint8_t>(bins[i]);

    double s_orig = pop_std(weights);
    double s_deq = pop_std(dequantize(q));
    q.rescale = (s_deq > 0.0 && s_orig > 0.0) ? s_orig / s_deq : 1.0;
    return q;
}

SkipPredicate default_skip() {
    return [](const NamedTensor& t) { return t.shape.size() <= 1; };
}

NetworkResult quantize_network(const std::vector<NamedTensor>& layers, int bits,
                               Scheme scheme, Rounding rounding, const SkipPredicate& skip) {
    NetworkResult res;
    res.tensors.resize(layers.size());
    res.reports.resize(layers.size());
    size_t total = 0, quantized = 0;

    for (size_t li = 0; li < layers.size(); ++li) {
        const NamedTensor& layer = layers[li];
        LayerReport& rep = res.reports[li];
        rep.name = layer.name;
        rep.count = layer.values.size();
        rep.bits = bits;
        total += layer.values.size();
        if (layer.values.empty()) {
            rep.note = "empty";
            continue;
        }
        rep.max_abs = 0.0;
        for (double w : layer.values) rep.max_abs = std::max(rep.max_abs, std::fabs(w));
        rep.sigma = pop_std(layer.values);
        if (skip(layer)) {
            rep.note = "skipped";
            continue;
        }
        if (rep.max_abs == 0.0 || rep.sigma == 0.0) {
            rep.note = "degenerate";
            continue;
        }
        try {
            QuantizedTensor q = quantize_tensor(layer.values, layer.shape, scheme, rounding,
                                                bits, X0Mode::heuristic());
            rep.x0 = q.x0;
            std::vector<double> deq = dequantize(q);
            std::vector<double> mags(layer.values.size()), dmags(deq.size());
            for (size_t i = 0; i < deq.size(); ++i) {
                mags[i] = std::fabs(layer.values[i]) / rep.max_abs;
                dmags[i] = q.codebook.values[q.codes[i]];
            }
            rep.rho = signed_rho(mags, dmags);
            try {
                rep.rho_signed = correlation(layer.values, deq);
            } catch (const std::domain_error&) {
                rep.rho_signed = 0.0;
            }
            rep.quantized = true;
            quantized += layer.values.size();
            res.tensors[li] = std::move(q);
        } catch (const std::exception& e) {
            rep.note = e.what();
        }
    }
    res.quantized_fraction = total ? static_cast<double>(quantized) / total : 0.0;
    return res;
}

}  // namespace wquant
