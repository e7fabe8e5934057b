#pragma once

#include <cstddef>
#include <span>

namespace cbilab {

/// Streaming mean and variance (Welford). Merging is order-sensitive in the
/// last bits, so callers that need bit-exact results merge in a fixed order.
class RunningStats {
public:
    void add(double x);
    void merge(const RunningStats& other);

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    /// Unbiased sample variance (0 for fewer than two samples).
    double variance() const;
    /// sample_std / sqrt(n).
    double stderr_of_mean() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct KsResult {
    double statistic;
    double p_value;  // asymptotic Kolmogorov distribution
};

/// Two-sample Kolmogorov-Smirnov test. Inputs need not be sorted.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// P(K > x) for the Kolmogorov distribution.
double kolmogorov_survival(double x);

}  // namespace cbilab
