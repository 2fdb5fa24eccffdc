#pragma once

#include <array>
#include <optional>
#include <vector>

#include "gsmae/splat.hpp"
#include "gsmae/tensor.hpp"

namespace gsmae {

// Symmetric squared Chamfer distance between point sets a (m, d) and
// b (m', d), both directions mean-normalized. Differentiable.
Tensor chamfer(const Tensor& a, const Tensor& b);

// Batched variant over (..., m, d) and (..., m', d); returns the mean of the
// per-batch Chamfer values.
Tensor chamfer_batched(const Tensor& a, const Tensor& b);

// Convenience on plain buffers (m x d, m' x d row-major).
double chamfer(const std::vector<double>& a, std::int64_t m, const std::vector<double>& b,
               std::int64_t mp, std::int64_t d);

// Occupancy counts of the three axis-aligned 2D projections (xy, xz, yz).
// Out-of-range points clip to the edge bins; each grid sums to the point
// count.
struct ProjectionHistogram {
    int bins = 50;
    double lo = -1.0, hi = 1.0;
    std::array<std::vector<double>, 3> grids; // each bins*bins

    static ProjectionHistogram build(const std::vector<double>& points, int bins = 50,
                                     double lo = -1.0, double hi = 1.0);
};

// Jensen-Shannon divergence (natural log) between the binned projections of
// two point sets, averaged over the three views. Result in [0, ln 2].
double jsd(const std::vector<double>& points_a, const std::vector<double>& points_b,
           int bins = 50, double lo = -1.0, double hi = 1.0);

// Unbiased squared maximum-mean-discrepancy estimate with a Gaussian kernel
// on the same three 2D projections, averaged over views and clamped at 0.
// The bandwidth defaults to the median pairwise distance of the pooled
// projected sample. This construction (kernel on projections) is this
// toolkit's convention; other MMD variants exist.
double mmd(const std::vector<double>& points_a, const std::vector<double>& points_b,
           std::optional<double> bandwidth = std::nullopt);

} // namespace gsmae
