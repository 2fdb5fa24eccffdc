#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gsmae/errors.hpp"
#include "gsmae/rng.hpp"

namespace gsmae {

// One object's Gaussian primitives as parallel arrays. All values are stored
// ACTIVATED: opacity after sigmoid, scale after exp, quaternion normalized
// with canonical sign (first component >= 0). Raw pre-activation values exist
// only at the PLY file boundary.
//
// sh rows follow the common splat-file layout: 3 DC coefficients (one per
// color channel) followed by 45 higher-order values, channel-major.
struct SplatSet {
    std::vector<double> centroids; // N*3
    std::vector<double> opacities; // N
    std::vector<double> scales;    // N*3, strictly positive
    std::vector<double> rotations; // N*4, (w,x,y,z)
    std::vector<double> sh;        // N*48

    std::int64_t size() const { return static_cast<std::int64_t>(opacities.size()); }

    static SplatSet with_size(std::int64_t n);

    // Throws DataError naming the first offending splat index.
    void validate() const;
};

struct Covariance3 {
    Eigen::Matrix3d sigma;
};

// Rotation matrix of a unit quaternion (w,x,y,z).
Eigen::Matrix3d quat_to_mat(const std::array<double, 4>& q);
// Hamilton product a*b.
std::array<double, 4> quat_mul(const std::array<double, 4>& a, const std::array<double, 4>& b);
// Unit norm plus canonical sign (first nonzero component positive).
std::array<double, 4> quat_canonical(std::array<double, 4> q);

// Sigma = R * diag(s) * diag(s)^T * R^T.
Covariance3 covariance(const std::array<double, 3>& scale, const std::array<double, 4>& rotation);

// Gaussian density at q weighted by the splat's opacity; the covariance is
// regularized with 1e-8 on the diagonal before inversion.
double influence(std::int64_t splat_index, const SplatSet& set, const std::array<double, 3>& q);

// Front-to-back alpha blending of per-splat influences and colors.
std::array<double, 3> composite_ray(const std::vector<double>& influences,
                                    const std::vector<std::array<double, 3>>& colors);

// Display color from the degree-0 coefficients only.
std::array<double, 3> sh_to_rgb(const double* sh_row);

// Base color to DC coefficients and back, matching sh_to_rgb's convention.
inline double rgb_to_dc(double c) { return (c - 0.5) / 0.282095; }

// Uniform random valid splat set (test and synthesis helper).
SplatSet random_splat_set(std::int64_t n, Rng& gen);

} // namespace gsmae
