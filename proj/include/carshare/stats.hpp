#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace carshare::stats {

double mean(std::span<const double> v);
/// Sample variance with n - 1 in the denominator; 0 for fewer than two values.
double variance(std::span<const double> v);
double stddev(std::span<const double> v);
/// Median; averages the two central values for even sizes. Throws on empty input.
double median(std::vector<double> v);
/// Linear-interpolation quantile (type 7). Throws on empty input.
double quantile(std::vector<double> v, double q);

/// P(Z > z) for a standard normal Z.
double normal_upper_tail(double z);

/// Root mean squared difference. Throws when the sizes differ or are zero.
double rmse(std::span<const double> predicted, std::span<const double> observed);

/// SplitMix64 step, used to derive independent seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace carshare::stats
