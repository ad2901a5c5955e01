#include "wquant/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "wquant/quantizer.hpp"

namespace wquant {

namespace {

constexpr size_t kMaxSamples = 20000;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Weighted prefix sums over groups of equal values.
struct GroupSums {
    std::vector<double> value;  // distinct sorted values
    std::vector<double> cnt, s1, s2;  // prefix sums, size D+1

    // SSE of groups [i, j) around their weighted mean.
    double cost(size_t i, size_t j) const {
        double c = cnt[j] - cnt[i];
        double a = s1[j] - s1[i];
        double b = s2[j] - s2[i];
        double sse = b - a * a / c;
        return sse > 0.0 ? sse : 0.0;
    }
    double mean(size_t i, size_t j) const { return (s1[j] - s1[i]) / (cnt[j] - cnt[i]); }
};

// dp row for k cells from the row for k-1 cells; the optimal split index is
// monotone in j, so divide and conquer keeps each row O(D log D).
void fill_row(const GroupSums& g, const std::vector<double>& prev, std::vector<double>& cur,
              std::vector<int>& parent, size_t k, size_t lo, size_t hi, size_t opt_lo,
              size_t opt_hi) {
    if (lo >= hi) return;
    size_t mid = lo + (hi - lo) / 2;
    double best = kInf;
    size_t best_i = opt_lo;
    size_t i_lo = std::max(opt_lo, k - 1);
    size_t i_hi = std::min(opt_hi, mid);  // split i < mid (cell k non-empty)
    for (size_t i = i_lo; i < i_hi; ++i) {
        if (prev[i] == kInf) continue;
        double c = prev[i] + g.cost(i, mid);
        if (c < best) {
            best = c;
            best_i = i;
        }
    }
    cur[mid] = best;
    parent[mid] = static_cast<int>(best_i);
    fill_row(g, prev, cur, parent, k, lo, mid, opt_lo, best_i + 1);
    fill_row(g, prev, cur, parent, k, mid + 1, hi, best_i, opt_hi);
}

}  // namespace

OptimalQuantizer optimal_partition(std::span<const double> magnitudes, int n) {
    if (n < 2) throw std::domain_error("optimal partition needs n >= 2");
    if (magnitudes.empty()) throw std::domain_error("optimal partition of an empty array");

    std::vector<double> sorted(magnitudes.begin(), magnitudes.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.size() > kMaxSamples) {
        std::vector<double> sub(kMaxSamples);
        double stride = static_cast<double>(sorted.size()) / kMaxSamples;
        for (size_t i = 0; i < kMaxSamples; ++i)
            sub[i] = sorted[static_cast<size_t>(i * stride)];
        sorted = std::move(sub);
    }

    GroupSums g;
    g.cnt.push_back(0.0);
    g.s1.push_back(0.0);
    g.s2.push_back(0.0);
    for (size_t i = 0; i < sorted.size();) {
        size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        double v = sorted[i], c = static_cast<double>(j - i);
        g.value.push_back(v);
        g.cnt.push_back(g.cnt.back() + c);
        g.s1.push_back(g.s1.back() + c * v);
        g.s2.push_back(g.s2.back() + c * v * v);
        i = j;
    }
    const size_t D = g.value.size();
    if (D < static_cast<size_t>(n))
        throw std::domain_error("fewer distinct values than requested cells");

    std::vector<double> prev(D + 1, kInf), cur(D + 1, kInf);
    std::vector<std::vector<int>> parents(n + 1, std::vector<int>(D + 1, 0));
    for (size_t j = 1; j <= D; ++j) prev[j] = g.cost(0, j);
    for (size_t k = 2; k <= static_cast<size_t>(n); ++k) {
        std::fill(cur.begin(), cur.end(), kInf);
        fill_row(g, prev, cur, parents[k], k, k, D + 1, k - 1, D);
        std::swap(prev, cur);
    }

    // Walk the parent pointers back into cell ranges [splits[c], splits[c+1]).
    std::vector<size_t> splits(n + 1);
    splits[n] = D;
    size_t j = D;
    for (size_t k = n; k >= 2; --k) {
        j = static_cast<size_t>(parents[k][j]);
        splits[k - 1] = j;
    }
    splits[0] = 0;

    OptimalQuantizer res;
    res.codebook.resize(n);
    res.cut_points.resize(n - 1);
    for (int c = 0; c < n; ++c) {
        res.codebook[c] = g.mean(splits[c], splits[c + 1]);
        if (c < n - 1)
            res.cut_points[c] = 0.5 * (g.value[splits[c + 1] - 1] + g.value[splits[c + 1]]);
    }

    // rho two ways: directly on the reconstruction, and via the conditional-
    // mean identity rho = rms_y / rms_x. They must agree.
    std::vector<double> recon(sorted.size());
    double sxx = 0.0, syy = 0.0;
    {
        size_t gi = 0, cell = 0;
        size_t done = 0;
        for (size_t i = 0; i < sorted.size(); ++i) {
            while (done >= static_cast<size_t>(g.cnt[gi + 1])) ++gi;
            while (gi >= splits[cell + 1]) ++cell;
            recon[i] = res.codebook[cell];
            ++done;
            sxx += sorted[i] * sorted[i];
            syy += recon[i] * recon[i];
        }
    }
    res.rho = signed_rho(sorted, recon);
    if (sxx > 0.0) {
        double rms_ratio = std::sqrt(syy / sxx);
        if (std::fabs(res.rho - rms_ratio) > 1e-9)
            throw std::logic_error("conditional-mean identity violated in optimal_partition");
    }
    return res;
}

}  // namespace wquant
