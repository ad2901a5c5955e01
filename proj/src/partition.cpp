#include "wquant/partition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wquant {

const char* to_string(Scheme s) {
    return s == Scheme::Linear ? "linear" : "exponential";
}

const char* to_string(Rounding r) {
    switch (r) {
        case Rounding::Floor: return "floor";
        case Rounding::Ceil: return "ceil";
        default: return "mean";
    }
}

Scheme parse_scheme(const std::string& s) {
    if (s == "linear") return Scheme::Linear;
    if (s == "exponential") return Scheme::Exponential;
    throw std::domain_error("unknown scheme '" + s + "' (expected linear|exponential)");
}

Rounding parse_rounding(const std::string& s) {
    if (s == "floor") return Rounding::Floor;
    if (s == "ceil") return Rounding::Ceil;
    if (s == "mean") return Rounding::Mean;
    throw std::domain_error("unknown rounding '" + s + "' (expected floor|ceil|mean)");
}

Partition make_partition(Scheme scheme, double x0, int n) {
    if (!(x0 > 0.0 && x0 < 1.0))
        throw std::domain_error("x0 must lie in (0,1), got " + std::to_string(x0));
    if (n < 2)
        throw std::domain_error("interval count must be >= 2, got " + std::to_string(n));

    Partition p;
    p.scheme = scheme;
    p.x0 = x0;
    p.n = n;
    p.boundaries.resize(static_cast<size_t>(n) + 1);
    p.boundaries[0] = 0.0;
    if (scheme == Scheme::Linear) {
        p.q = (1.0 - x0) / (n - 1);
        for (int k = 1; k <= n; ++k) p.boundaries[k] = x0 + (k - 1) * p.q;
    } else {
        p.q = std::pow(x0, -1.0 / (n - 1));
        for (int k = 1; k <= n; ++k) p.boundaries[k] = x0 * std::pow(p.q, k - 1);
    }
    p.boundaries[n] = 1.0;  // kill the last rounding error
    return p;
}

int assign_bin(double v, const Partition& p) {
    if (v <= p.boundaries[1]) return 0;  // covers v = 0 as well
    // smallest i with v <= boundaries[i+1]
    auto it = std::lower_bound(p.boundaries.begin() + 1, p.boundaries.end(), v);
    return static_cast<int>(it - p.boundaries.begin()) - 1;
}

std::vector<int> assign_bins(std::span<const double> magnitudes, const Partition& p) {
    std::vector<int> bins(magnitudes.size());
    for (size_t i = 0; i < magnitudes.size(); ++i) {
        double v = magnitudes[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw std::domain_error("magnitude outside [0,1]: " + std::to_string(v));
        bins[i] = assign_bin(v, p);
    }
    return bins;
}

Codebook build_codebook(std::span<const double> magnitudes, std::span<const int> bins,
                        const Partition& p, Rounding rounding) {
    Codebook cb;
    cb.rounding = rounding;
    cb.values.resize(p.n);
    if (rounding == Rounding::Floor) {
        for (int i = 0; i < p.n; ++i) cb.values[i] = p.boundaries[i];
    } else if (rounding == Rounding::Ceil) {
        for (int i = 0; i < p.n; ++i) cb.values[i] = p.boundaries[i + 1];
    } else {
        std::vector<double> sum(p.n, 0.0);
        std::vector<size_t> cnt(p.n, 0);
        for (size_t i = 0; i < bins.size(); ++i) {
            sum[bins[i]] += magnitudes[i];
            ++cnt[bins[i]];
        }
        for (int i = 0; i < p.n; ++i) {
            cb.values[i] = cnt[i] ? sum[i] / cnt[i]
                                  : 0.5 * (p.boundaries[i] + p.boundaries[i + 1]);
        }
    }
    return cb;
}

}  // namespace wquant
