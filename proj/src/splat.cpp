#include "gsmae/splat.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gsmae {

SplatSet SplatSet::with_size(std::int64_t n) {
    SplatSet s;
    s.centroids.assign(n * 3, 0.0);
    s.opacities.assign(n, 0.0);
    s.scales.assign(n * 3, 1.0);
    s.rotations.assign(n * 4, 0.0);
    for (std::int64_t i = 0; i < n; ++i) s.rotations[i * 4] = 1.0;
    s.sh.assign(n * 48, 0.0);
    return s;
}

void SplatSet::validate() const {
    const std::int64_t n = size();
    if (static_cast<std::int64_t>(centroids.size()) != n * 3 ||
        static_cast<std::int64_t>(scales.size()) != n * 3 ||
        static_cast<std::int64_t>(rotations.size()) != n * 4 ||
        static_cast<std::int64_t>(sh.size()) != n * 48)
        throw DataError("splat set arrays disagree on the splat count");
    for (std::int64_t i = 0; i < n; ++i) {
        const std::string at = " at splat " + std::to_string(i);
        for (int d = 0; d < 3; ++d) {
            if (!std::isfinite(centroids[i * 3 + d])) throw DataError("non-finite centroid" + at);
            if (!(scales[i * 3 + d] > 0.0) || !std::isfinite(scales[i * 3 + d]))
                throw DataError("non-positive or non-finite scale" + at);
        }
        if (!(opacities[i] >= 0.0 && opacities[i] <= 1.0))
            throw DataError("opacity outside [0,1]" + at);
        double norm2 = 0.0;
        for (int d = 0; d < 4; ++d) {
            const double v = rotations[i * 4 + d];
            if (!std::isfinite(v)) throw DataError("non-finite quaternion" + at);
            norm2 += v * v;
        }
        if (std::abs(std::sqrt(norm2) - 1.0) > 1e-5)
            throw DataError("quaternion not unit norm" + at);
        if (rotations[i * 4] < 0.0) throw DataError("quaternion sign not canonical" + at);
        for (int d = 0; d < 48; ++d)
            if (!std::isfinite(sh[i * 48 + d])) throw DataError("non-finite sh coefficient" + at);
    }
}

Eigen::Matrix3d quat_to_mat(const std::array<double, 4>& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
        2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
        2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
    return r;
}

std::array<double, 4> quat_mul(const std::array<double, 4>& a, const std::array<double, 4>& b) {
    return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

std::array<double, 4> quat_canonical(std::array<double, 4> q) {
    double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (norm < 1e-30) throw InvalidInputError("cannot normalize zero quaternion");
    for (auto& v : q) v /= norm;
    for (int d = 0; d < 4; ++d) {
        if (q[d] > 0.0) break;
        if (q[d] < 0.0) {
            for (auto& v : q) v = -v;
            break;
        }
    }
    return q;
}

Covariance3 covariance(const std::array<double, 3>& scale,
                       const std::array<double, 4>& rotation) {
    for (double v : scale)
        if (!std::isfinite(v) || v <= 0.0)
            throw InvalidInputError("covariance: scale must be finite and positive");
    for (double v : rotation)
        if (!std::isfinite(v)) throw InvalidInputError("covariance: non-finite quaternion");
    const Eigen::Matrix3d r = quat_to_mat(rotation);
    const Eigen::Vector3d s(scale[0], scale[1], scale[2]);
    const Eigen::Matrix3d rs = r * s.asDiagonal();
    return Covariance3{rs * rs.transpose()};
}

double influence(std::int64_t splat_index, const SplatSet& set, const std::array<double, 3>& q) {
    if (splat_index < 0 || splat_index >= set.size())
        throw InvalidInputError("influence: splat index out of range");
    const std::int64_t i = splat_index;
    const std::array<double, 3> scale{set.scales[i * 3], set.scales[i * 3 + 1],
                                      set.scales[i * 3 + 2]};
    const std::array<double, 4> rot{set.rotations[i * 4], set.rotations[i * 4 + 1],
                                    set.rotations[i * 4 + 2], set.rotations[i * 4 + 3]};
    Eigen::Matrix3d sigma = covariance(scale, rot).sigma;
    sigma.diagonal().array() += 1e-8;
    const Eigen::Matrix3d inv = sigma.inverse();
    if (!inv.allFinite()) throw NumericError("influence: covariance is numerically singular");
    const Eigen::Vector3d d(q[0] - set.centroids[i * 3], q[1] - set.centroids[i * 3 + 1],
                            q[2] - set.centroids[i * 3 + 2]);
    return set.opacities[i] * std::exp(-0.5 * d.dot(inv * d));
}

std::array<double, 3> composite_ray(const std::vector<double>& influences,
                                    const std::vector<std::array<double, 3>>& colors) {
    if (influences.size() != colors.size())
        throw InvalidInputError("composite_ray: influence and color counts disagree");
    std::array<double, 3> out{0.0, 0.0, 0.0};
    double transmittance = 1.0;
    for (std::size_t i = 0; i < influences.size(); ++i) {
        const double f = influences[i];
        if (!(f >= 0.0 && f <= 1.0))
            throw InvalidInputError("composite_ray: influence outside [0,1]");
        for (int c = 0; c < 3; ++c) out[c] += colors[i][c] * f * transmittance;
        transmittance *= 1.0 - f;
    }
    return out;
}

std::array<double, 3> sh_to_rgb(const double* sh_row) {
    std::array<double, 3> rgb;
    for (int c = 0; c < 3; ++c)
        rgb[c] = std::clamp(0.5 + 0.282095 * sh_row[c], 0.0, 1.0);
    return rgb;
}

SplatSet random_splat_set(std::int64_t n, Rng& gen) {
    SplatSet s = SplatSet::with_size(n);
    for (std::int64_t i = 0; i < n; ++i) {
        for (int d = 0; d < 3; ++d) {
            s.centroids[i * 3 + d] = draw_range(gen, -1.0, 1.0);
            s.scales[i * 3 + d] = std::exp(draw_range(gen, -4.0, 0.0));
        }
        s.opacities[i] = draw_range(gen, 0.02, 0.98);
        std::array<double, 4> q;
        for (auto& v : q) v = draw_normal(gen);
        q = quat_canonical(q);
        for (int d = 0; d < 4; ++d) s.rotations[i * 4 + d] = q[d];
        for (int d = 0; d < 48; ++d) s.sh[i * 48 + d] = draw_normal(gen) * 0.3;
    }
    return s;
}

} // namespace gsmae
