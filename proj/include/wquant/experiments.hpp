#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "wquant/partition.hpp"

namespace wquant {

enum class DistKind { Gaussian, Laplacian };

const char* to_string(DistKind k);
DistKind parse_dist(const std::string& s);

struct DistributionSpec {
    DistKind kind = DistKind::Laplacian;
    double scale = 1.0;
    int count = 10000;
    uint64_t seed = 0;
};

// Deterministic given the seed: Gaussian via Box-Muller, Laplacian via the
// inverse CDF of the double exponential, both over mt19937_64 uniforms.
std::vector<double> sample(const DistributionSpec& spec);

// splitmix64 counter stream; trial t of a run uses trial_seed(master, t).
uint64_t trial_seed(uint64_t master, uint64_t t);

struct TrialStats {
    DistKind dist;
    int bits;
    Scheme scheme;
    Rounding rounding;
    double mean_rho = 0.0, std_rho = 0.0;
    double mean_x0_sigma = 0.0, std_x0_sigma = 0.0;
    int trials = 0;
};

// One sample vector per trial, swept for every (B, scheme, rounding) cell;
// aggregates mean +/- sample std of the best rho and best x0 / sigma_x.
std::vector<TrialStats> run_table_experiment(DistKind kind, double scale,
                                             std::span<const int> bits, int trials,
                                             uint64_t master_seed, int threads = 0);

// (sigma_x, best_x0) pairs in data units, one per experiment, with the
// distribution scale varied log-uniformly in [0.5, 2.0] per experiment.
std::vector<std::pair<double, double>> x0_vs_sigma_study(DistKind kind, int bits,
                                                         int experiments, uint64_t seed);

struct RegressionFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Least-squares slope/intercept of y against x.
RegressionFit fit_line(std::span<const double> x, std::span<const double> y);

// log2(mean x0/sigma) against B for one (scheme, rounding) column.
// Throws std::domain_error with fewer than 4 distinct bit levels.
RegressionFit fit_x0_regression(const std::vector<TrialStats>& stats, Scheme scheme,
                                Rounding rounding);

// Through-origin fit for the x0-vs-sigma scatter.
RegressionFit fit_through_origin(std::span<const std::pair<double, double>> points);

void emit_csv(const std::vector<TrialStats>& results, const std::filesystem::path& path);
std::vector<TrialStats> parse_csv(const std::filesystem::path& path);

}  // namespace wquant
