#pragma once

// Test-only reference implementations, kept deliberately independent of the
// library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

namespace oracle {

inline double dist2(const double* a, const double* b, std::int64_t d) {
    double acc = 0;
    for (std::int64_t i = 0; i < d; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
}

// Greedy farthest-point sampling with an externally chosen first index.
inline std::vector<std::int64_t> fps_brute(const std::vector<double>& pts, std::int64_t p,
                                           std::int64_t d, std::int64_t n, std::int64_t first) {
    std::vector<std::int64_t> chosen{first};
    while (static_cast<std::int64_t>(chosen.size()) < n) {
        std::int64_t best = -1;
        double best_d = -1;
        for (std::int64_t i = 0; i < p; ++i) {
            double mind = std::numeric_limits<double>::infinity();
            for (auto c : chosen) mind = std::min(mind, dist2(&pts[i * d], &pts[c * d], d));
            if (mind > best_d) {
                best_d = mind;
                best = i;
            }
        }
        chosen.push_back(best);
    }
    return chosen;
}

inline std::vector<std::int64_t> knn_brute(const double* query, const std::vector<double>& pts,
                                           std::int64_t p, std::int64_t d, std::int64_t k) {
    std::vector<std::pair<double, std::int64_t>> all;
    for (std::int64_t i = 0; i < p; ++i) all.push_back({dist2(query, &pts[i * d], d), i});
    std::stable_sort(all.begin(), all.end(),
                     [](auto& a, auto& b) { return a.first < b.first; });
    std::vector<std::int64_t> out;
    for (std::int64_t i = 0; i < k; ++i) out.push_back(all[i].second);
    return out;
}

// Double-loop symmetric squared Chamfer distance.
inline double chamfer_brute(const std::vector<double>& a, std::int64_t na,
                            const std::vector<double>& b, std::int64_t nb, std::int64_t d) {
    double ab = 0;
    for (std::int64_t i = 0; i < na; ++i) {
        double mind = std::numeric_limits<double>::infinity();
        for (std::int64_t j = 0; j < nb; ++j)
            mind = std::min(mind, dist2(&a[i * d], &b[j * d], d));
        ab += mind;
    }
    double ba = 0;
    for (std::int64_t j = 0; j < nb; ++j) {
        double mind = std::numeric_limits<double>::infinity();
        for (std::int64_t i = 0; i < na; ++i)
            mind = std::min(mind, dist2(&a[i * d], &b[j * d], d));
        ba += mind;
    }
    return ab / static_cast<double>(na) + ba / static_cast<double>(nb);
}

// Inverse-distance-squared interpolation of center features at a query.
inline std::vector<double> interpolate_brute(const std::vector<double>& centers,
                                             const std::vector<double>& feats, std::int64_t p,
                                             std::int64_t dim, const double* query,
                                             std::int64_t k) {
    auto nn = knn_brute(query, centers, p, 3, k);
    if (dist2(query, &centers[nn[0] * 3], 3) < 1e-12)
        return {feats.begin() + nn[0] * dim, feats.begin() + (nn[0] + 1) * dim};
    std::vector<double> w(k);
    double wsum = 0;
    for (std::int64_t j = 0; j < k; ++j) {
        w[j] = 1.0 / (dist2(query, &centers[nn[j] * 3], 3) + 1e-8);
        wsum += w[j];
    }
    std::vector<double> out(dim, 0.0);
    for (std::int64_t j = 0; j < k; ++j)
        for (std::int64_t c = 0; c < dim; ++c) out[c] += w[j] / wsum * feats[nn[j] * dim + c];
    return out;
}

// Per-class IoU from an explicit confusion matrix; classes absent from both
// sides are reported as -1.
inline std::vector<double> iou_brute(const std::vector<int>& pred, const std::vector<int>& truth,
                                     int classes) {
    std::vector<std::vector<std::int64_t>> conf(classes, std::vector<std::int64_t>(classes, 0));
    for (std::size_t i = 0; i < pred.size(); ++i) conf[truth[i]][pred[i]]++;
    std::vector<double> out(classes);
    for (int c = 0; c < classes; ++c) {
        std::int64_t tp = conf[c][c], fp = 0, fn = 0;
        for (int o = 0; o < classes; ++o) {
            if (o != c) {
                fp += conf[o][c];
                fn += conf[c][o];
            }
        }
        out[c] = (tp + fp + fn) == 0 ? -1.0
                                     : static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    }
    return out;
}

// Histogram + KL reference for the projection divergence.
inline double jsd_brute(const std::vector<double>& a, const std::vector<double>& b,
                        int bins = 50) {
    auto histogram = [&](const std::vector<double>& pts, int ax0, int ax1) {
        std::vector<double> h(bins * bins, 0.0);
        const std::int64_t n = static_cast<std::int64_t>(pts.size()) / 3;
        for (std::int64_t i = 0; i < n; ++i) {
            auto bin = [&](double v) {
                int idx = static_cast<int>((v + 1.0) / 2.0 * bins);
                return std::clamp(idx, 0, bins - 1);
            };
            h[bin(pts[i * 3 + ax0]) * bins + bin(pts[i * 3 + ax1])] += 1.0;
        }
        return h;
    };
    auto kl = [&](const std::vector<double>& p, const std::vector<double>& q) {
        double acc = 0;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (p[i] > 0) acc += p[i] * std::log(p[i] / q[i]);
        return acc;
    };
    const int views[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    double total = 0;
    for (auto& v : views) {
        auto ha = histogram(a, v[0], v[1]);
        auto hb = histogram(b, v[0], v[1]);
        double sa = 0, sb = 0;
        for (double x : ha) sa += x;
        for (double x : hb) sb += x;
        std::vector<double> pa(ha.size()), pb(hb.size()), m(ha.size());
        for (std::size_t i = 0; i < ha.size(); ++i) {
            pa[i] = (ha[i] + 1e-12) / (sa + 1e-12 * ha.size());
            pb[i] = (hb[i] + 1e-12) / (sb + 1e-12 * hb.size());
            m[i] = 0.5 * (pa[i] + pb[i]);
        }
        total += 0.5 * kl(pa, m) + 0.5 * kl(pb, m);
    }
    return total / 3.0;
}

} // namespace oracle
