#pragma once

#include <span>
#include <vector>

namespace wquant {

// Best arbitrary-interval quantizer with conditional-mean reconstruction:
// the partition of the samples into n contiguous groups (by value) that
// minimizes total within-group squared deviation.
struct OptimalQuantizer {
    std::vector<double> cut_points;  // n-1 interior boundaries, strictly increasing
    std::vector<double> codebook;    // n conditional means
    double rho = 0.0;                // sweep-convention correlation of the reconstruction
};

// Exact dynamic program over the sorted samples. Ties are never split across
// cells; inputs longer than 20 000 are deterministically subsampled (strided
// over the sorted array). Throws std::domain_error with fewer than n distinct
// values.
OptimalQuantizer optimal_partition(std::span<const double> magnitudes, int n);

}  // namespace wquant
