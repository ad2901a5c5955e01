#include "wquant/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "wquant/errors.hpp"
#include "wquant/quantizer.hpp"

namespace wquant {

namespace {

double uniform01(std::mt19937_64& rng) {
    // strictly inside (0,1)
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

int resolve_threads(int threads) {
    if (threads > 0) return threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

struct Cell {
    int bits;
    Scheme scheme;
    Rounding rounding;
};

std::vector<Cell> make_cells(std::span<const int> bits) {
    std::vector<Cell> cells;
    for (int b : bits)
        for (Scheme s : {Scheme::Exponential, Scheme::Linear})
            for (Rounding r : {Rounding::Mean, Rounding::Ceil, Rounding::Floor})
                cells.push_back({b, s, r});
    return cells;
}

void mean_std(std::span<const double> v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    sd = 0.0;
    if (v.size() >= 2) {
        double acc = 0.0;
        for (double x : v) acc += (x - mean) * (x - mean);
        sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
    }
}

}  // namespace

const char* to_string(DistKind k) { return k == DistKind::Gaussian ? "gaussian" : "laplacian"; }

DistKind parse_dist(const std::string& s) {
    if (s == "gaussian") return DistKind::Gaussian;
    if (s == "laplacian") return DistKind::Laplacian;
    throw std::domain_error("unknown distribution '" + s + "' (expected gaussian|laplacian)");
}

std::vector<double> sample(const DistributionSpec& spec) {
    if (spec.count <= 0) throw std::domain_error("sample count must be positive");
    if (!(spec.scale > 0.0)) throw std::domain_error("scale must be positive");
    std::mt19937_64 rng(spec.seed);
    std::vector<double> out(spec.count);
    if (spec.kind == DistKind::Laplacian) {
        for (double& x : out) {
            double u = uniform01(rng);
            x = (u < 0.5) ? spec.scale * std::log(2.0 * u)
                          : -spec.scale * std::log(2.0 * (1.0 - u));
        }
    } else {
        for (size_t i = 0; i < out.size(); i += 2) {
            double u1 = uniform01(rng), u2 = uniform01(rng);
            double r = std::sqrt(-2.0 * std::log(u1)), a = 2.0 * std::numbers::pi * u2;
            out[i] = spec.scale * r * std::cos(a);
            if (i + 1 < out.size()) out[i + 1] = spec.scale * r * std::sin(a);
        }
    }
    return out;
}

uint64_t trial_seed(uint64_t master, uint64_t t) {
    uint64_t state = master;
    uint64_t z = 0;
    for (uint64_t i = 0; i <= t; ++i) z = splitmix64(state);
    return z;
}

std::vector<TrialStats> run_table_experiment(DistKind kind, double scale,
                                             std::span<const int> bits, int trials,
                                             uint64_t master_seed, int threads) {
    if (trials < 2) throw std::domain_error("need at least 2 trials");
    for (int b : bits)
        if (b < 2 || b > 8) throw std::domain_error("bit widths must lie in [2,8]");

    const std::vector<Cell> cells = make_cells(bits);
    // per cell, per trial; NaN marks a failed trial
    std::vector<std::vector<double>> rho(cells.size(), std::vector<double>(trials));
    std::vector<std::vector<double>> x0s(cells.size(), std::vector<double>(trials));

    std::atomic<int> next{0};
    auto worker = [&] {
        for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) {
            DistributionSpec spec{kind, scale, 10000, trial_seed(master_seed, t)};
            std::vector<double> w = sample(spec);
            NormalizedTensor nt = normalize(w, {w.size()});
            for (size_t c = 0; c < cells.size(); ++c) {
                try {
                    SweepResult r =
                        sweep_x0(nt.magnitudes, cells[c].scheme, cells[c].rounding, cells[c].bits);
                    rho[c][t] = r.best_rho;
                    x0s[c][t] = r.best_x0 / r.sigma;
                } catch (const std::exception&) {
                    rho[c][t] = std::nan("");
                    x0s[c][t] = std::nan("");
                }
            }
        }
    };
    int nthreads = std::min(resolve_threads(threads), trials);
    std::vector<std::jthread> pool;
    for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
    worker();
    pool.clear();

    std::vector<TrialStats> stats(cells.size());
    for (size_t c = 0; c < cells.size(); ++c) {
        TrialStats& s = stats[c];
        s.dist = kind;
        s.bits = cells[c].bits;
        s.scheme = cells[c].scheme;
        s.rounding = cells[c].rounding;
        std::vector<double> r_ok, x_ok;
        for (int t = 0; t < trials; ++t) {
            if (!std::isnan(rho[c][t])) {
                r_ok.push_back(rho[c][t]);
                x_ok.push_back(x0s[c][t]);
            }
        }
        s.trials = static_cast<int>(r_ok.size());
        if (!r_ok.empty()) {
            mean_std(r_ok, s.mean_rho, s.std_rho);
            mean_std(x_ok, s.mean_x0_sigma, s.std_x0_sigma);
        }
    }
    return stats;
}

std::vector<std::pair<double, double>> x0_vs_sigma_study(DistKind kind, int bits,
                                                         int experiments, uint64_t seed) {
    if (experiments < 10) throw std::domain_error("need at least 10 experiments");
    std::vector<std::pair<double, double>> points;
    points.reserve(experiments);
    for (int e = 0; e < experiments; ++e) {
        uint64_t s = trial_seed(seed, e);
        uint64_t scale_state = s;
        double u = (static_cast<double>(splitmix64(scale_state) >> 11) + 0.5) * 0x1.0p-53;
        double scale = std::exp(std::log(0.5) + u * std::log(4.0));  // [0.5, 2.0]
        DistributionSpec spec{kind, scale, 10000, s};
        std::vector<double> w = sample(spec);
        NormalizedTensor nt = normalize(w, {w.size()});
        SweepResult r = sweep_x0(nt.magnitudes, Scheme::Exponential, Rounding::Mean, bits);
        points.emplace_back(r.sigma * nt.max_abs, r.best_x0 * nt.max_abs);
    }
    return points;
}

RegressionFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::domain_error("regression needs at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::domain_error("regression abscissae are constant");
    RegressionFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

RegressionFit fit_x0_regression(const std::vector<TrialStats>& stats, Scheme scheme,
                                Rounding rounding) {
    std::vector<double> b, y;
    for (const TrialStats& s : stats) {
        if (s.scheme == scheme && s.rounding == rounding && s.mean_x0_sigma > 0.0) {
            b.push_back(static_cast<double>(s.bits));
            y.push_back(std::log2(s.mean_x0_sigma));
        }
    }
    std::vector<double> uniq = b;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    if (uniq.size() < 4)
        throw std::domain_error("x0 regression needs at least 4 distinct bit levels");
    return fit_line(b, y);
}

RegressionFit fit_through_origin(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) throw std::domain_error("regression needs at least 2 points");
    double sxx = 0, sxy = 0, my = 0;
    for (auto& [x, y] : points) {
        sxx += x * x;
        sxy += x * y;
        my += y;
    }
    my /= static_cast<double>(points.size());
    if (sxx == 0.0) throw std::domain_error("regression abscissae are all zero");
    RegressionFit f;
    f.slope = sxy / sxx;
    f.intercept = 0.0;
    double ss_res = 0, ss_tot = 0;
    for (auto& [x, y] : points) {
        double e = y - f.slope * x;
        ss_res += e * e;
        ss_tot += (y - my) * (y - my);
    }
    f.r_squared = (ss_tot == 0.0) ? 1.0 : 1.0 - ss_res / ss_tot;
    return f;
}

void emit_csv(const std::vector<TrialStats>& results, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out << "dist,bits,scheme,rounding,mean_rho,std_rho,mean_x0_sigma,std_x0_sigma,trials\n";
    char buf[256];
    for (const TrialStats& s : results) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%s,%s,%.17g,%.17g,%.17g,%.17g,%d\n",
                      to_string(s.dist), s.bits, to_string(s.scheme), to_string(s.rounding),
                      s.mean_rho, s.std_rho, s.mean_x0_sigma, s.std_x0_sigma, s.trials);
        out << buf;
    }
    if (!out) throw io_error("write failed: " + path.string());
}

std::vector<TrialStats> parse_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty csv: " + path.string());
    std::vector<TrialStats> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        TrialStats s;
        std::getline(ss, field, ',');
        s.dist = parse_dist(field);
        std::getline(ss, field, ',');
        s.bits = std::stoi(field);
        std::getline(ss, field, ',');
        s.scheme = parse_scheme(field);
        std::getline(ss, field, ',');
        s.rounding = parse_rounding(field);
        std::getline(ss, field, ',');
        s.mean_rho = std::stod(field);
        std::getline(ss, field, ',');
        s.std_rho = std::stod(field);
        std::getline(ss, field, ',');
        s.mean_x0_sigma = std::stod(field);
        std::getline(ss, field, ',');
        s.std_x0_sigma = std::stod(field);
        std::getline(ss, field, ',');
        s.trials = std::stoi(field);
        out.push_back(s);
    }
    return out;
}

}  // namespace wquant
