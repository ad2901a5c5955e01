#pragma once

#include <span>
#include <string>
#include <vector>

namespace wquant {

enum class Scheme { Linear, Exponential };
enum class Rounding { Floor, Ceil, Mean };

const char* to_string(Scheme s);
const char* to_string(Rounding r);
Scheme parse_scheme(const std::string& s);
Rounding parse_rounding(const std::string& s);

// Interval partition of [0,1]: boundaries[0] = 0, boundaries[1] = x0,
// boundaries[n] = 1, strictly increasing. `q` is the step (linear) or
// ratio (exponential) of the intervals above the first one.
struct Partition {
    Scheme scheme;
    double x0;
    int n;
    double q;
    std::vector<double> boundaries;  // n + 1 entries
};

// Throws std::domain_error unless 0 < x0 < 1 and n >= 2.
Partition make_partition(Scheme scheme, double x0, int n);

// Bin index of a single magnitude v in [0,1]: intervals are
// lower-exclusive / upper-inclusive, with v = 0 assigned to bin 0.
int assign_bin(double v, const Partition& p);

// Throws std::domain_error if any magnitude is outside [0,1].
std::vector<int> assign_bins(std::span<const double> magnitudes, const Partition& p);

struct Codebook {
    Rounding rounding;
    std::vector<double> values;  // one reconstruction value per interval
};

// floor -> lower boundary, ceil -> upper boundary, mean -> arithmetic mean
// of the samples in the interval (midpoint when the interval is empty).
Codebook build_codebook(std::span<const double> magnitudes, std::span<const int> bins,
                        const Partition& p, Rounding rounding);

}  // namespace wquant
