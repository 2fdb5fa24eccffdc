#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gsmae/grouping.hpp"
#include "oracles.hpp"

using namespace gsmae;

namespace {

SplatSet cube_corner_set() {
    SplatSet s = SplatSet::with_size(8);
    int i = 0;
    for (int x = 0; x <= 1; ++x)
        for (int y = 0; y <= 1; ++y)
            for (int z = 0; z <= 1; ++z) {
                s.centroids[i * 3] = x;
                s.centroids[i * 3 + 1] = y;
                s.centroids[i * 3 + 2] = z;
                s.opacities[i] = 0.5;
                ++i;
            }
    return s;
}

// two spatial clusters far apart, 32 splats each
SplatSet two_cluster_set(Rng& gen) {
    SplatSet s = SplatSet::with_size(64);
    for (int i = 0; i < 64; ++i) {
        const double base = i < 32 ? -100.0 : 100.0;
        s.centroids[i * 3] = base + draw_normal(gen) * 0.5;
        s.centroids[i * 3 + 1] = draw_normal(gen) * 0.5;
        s.centroids[i * 3 + 2] = draw_normal(gen) * 0.5;
        s.opacities[i] = 0.5;
    }
    return s;
}

double intra_group_opacity_variance(const SplatSet& set, const GroupedSplats& g) {
    double total = 0.0;
    for (std::int64_t i = 0; i < g.n; ++i) {
        double m = 0;
        for (std::int64_t j = 0; j < g.group_size; ++j)
            m += set.opacities[g.neighbor_indices[i * g.group_size + j]];
        m /= g.group_size;
        double v = 0;
        for (std::int64_t j = 0; j < g.group_size; ++j) {
            const double o = set.opacities[g.neighbor_indices[i * g.group_size + j]];
            v += (o - m) * (o - m);
        }
        total += v / g.group_size;
    }
    return total / g.n;
}

} // namespace

TEST_CASE("feature selection parsing and dims") {
    FeatureSelection sel = FeatureSelection::make("C,O", "C,SH");
    CHECK(sel.grouping_dim() == 4);
    CHECK(sel.embedding_dim() == 51);
    CHECK(blocks_to_string(sel.grouping) == "C,O");
    FeatureSelection all = FeatureSelection::make("sh, r, s, o, c", "C");
    CHECK(blocks_to_string(all.grouping) == "C,O,S,R,SH");
    CHECK(all.grouping_dim() == 14);
    CHECK_THROWS_AS(FeatureSelection::make("", "C"), ConfigError);
    CHECK_THROWS_AS(FeatureSelection::make("C", "Q"), ConfigError);
}

TEST_CASE("normalize_features on cube corners") {
    SplatSet s = cube_corner_set();
    auto f = normalize_features(s, {ParamBlock::Centroid});
    for (int j = 0; j < 3; ++j) {
        double m = 0;
        for (int i = 0; i < 8; ++i) m += f[i * 3 + j];
        CHECK(std::abs(m / 8) < 1e-9);
    }
    double max_norm = 0;
    for (int i = 0; i < 8; ++i) {
        double n2 = 0;
        for (int j = 0; j < 3; ++j) n2 += f[i * 3 + j] * f[i * 3 + j];
        max_norm = std::max(max_norm, std::sqrt(n2));
    }
    CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize_features degenerate guard zeroes identical splats") {
    SplatSet s = SplatSet::with_size(5);
    for (int i = 0; i < 5; ++i) {
        s.centroids[i * 3] = 0.7;
        s.opacities[i] = 0.4;
    }
    auto f = normalize_features(s, {ParamBlock::Centroid, ParamBlock::Opacity});
    for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("normalize_features single opacity column by hand") {
    SplatSet s = SplatSet::with_size(2);
    s.opacities = {0.2, 0.8};
    auto f = normalize_features(s, {ParamBlock::Opacity});
    CHECK(f[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize_features passes quaternions through") {
    Rng gen(41);
    SplatSet s = random_splat_set(6, gen);
    auto f = normalize_features(s, {ParamBlock::Rotation});
    for (int i = 0; i < 6; ++i)
        for (int d = 0; d < 4; ++d) CHECK(f[i * 4 + d] == s.rotations[i * 4 + d]);
}

TEST_CASE("normalize_features property: non-rotation blocks recentred and unit-capped") {
    Rng gen(42);
    for (int trial = 0; trial < 10; ++trial) {
        SplatSet s = random_splat_set(50, gen);
        auto f = normalize_features(s, {ParamBlock::Centroid, ParamBlock::Opacity,
                                        ParamBlock::Scale, ParamBlock::Sh});
        const std::int64_t dims[] = {3, 1, 3, 3};
        std::int64_t off = 0;
        const std::int64_t row = 10;
        for (auto d : dims) {
            for (std::int64_t j = 0; j < d; ++j) {
                double m = 0;
                for (int i = 0; i < 50; ++i) m += f[i * row + off + j];
                CHECK(std::abs(m / 50) < 1e-9);
            }
            double max_norm = 0;
            for (int i = 0; i < 50; ++i) {
                double n2 = 0;
                for (std::int64_t j = 0; j < d; ++j)
                    n2 += f[i * row + off + j] * f[i * row + off + j];
                max_norm = std::max(max_norm, std::sqrt(n2));
            }
            CHECK((max_norm < 1e-12 || std::abs(max_norm - 1.0) < 1e-12));
            off += d;
        }
    }
}

TEST_CASE("fps covers everything when n equals p") {
    Rng gen(43);
    SplatSet s = random_splat_set(16, gen);
    auto f = normalize_features(s, {ParamBlock::Centroid});
    auto idx = fps(f, 16, 3, 16, 7);
    std::set<std::int64_t> uniq(idx.begin(), idx.end());
    CHECK(uniq.size() == 16);
}

TEST_CASE("fps on a square picks the diagonal corner second") {
    // corners 0..3; any seeded start, the farthest point is the diagonal
    std::vector<double> pts{0, 0, 1, 0, 1, 1, 0, 1};
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto idx = fps(pts, 4, 2, 2, seed);
        const double dx = pts[idx[0] * 2] - pts[idx[1] * 2];
        const double dy = pts[idx[0] * 2 + 1] - pts[idx[1] * 2 + 1];
        CHECK(dx * dx + dy * dy == doctest::Approx(2.0));
    }
}

TEST_CASE("fps matches brute-force oracle") {
    Rng gen(44);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> pts(64 * 3);
        for (auto& v : pts) v = draw_normal(gen);
        auto idx = fps(pts, 64, 3, 8, trial);
        auto expect = oracle::fps_brute(pts, 64, 3, 8, idx[0]);
        CHECK(idx == expect);
    }
}

TEST_CASE("fps rejects oversampling") {
    std::vector<double> pts{0, 0, 1, 1};
    CHECK_THROWS_AS(fps(pts, 2, 2, 3, 0), InvalidInputError);
}

TEST_CASE("knn basics") {
    // query equal to a data point comes back first
    std::vector<double> pts{0, 0, 5, 0, 2, 0};
    std::vector<double> q{2, 0};
    auto idx = knn(q, 1, pts, 3, 2, 1);
    CHECK(idx[0] == 2);

    // colinear points, query at 0
    std::vector<double> line{0, 1, 2, 3};
    std::vector<double> q0{0.0};
    auto two = knn(q0, 1, line, 4, 1, 2);
    CHECK(two[0] == 0);
    CHECK(two[1] == 1);

    CHECK_THROWS_AS(knn(q0, 1, line, 4, 1, 5), InvalidInputError);
}

TEST_CASE("knn matches brute-force oracle in 6 dims") {
    Rng gen(45);
    std::vector<double> pts(128 * 6);
    for (auto& v : pts) v = draw_normal(gen);
    std::vector<double> queries(10 * 6);
    for (auto& v : queries) v = draw_normal(gen);
    auto idx = knn(queries, 10, pts, 128, 6, 16);
    for (int q = 0; q < 10; ++q) {
        auto expect = oracle::knn_brute(&queries[q * 6], pts, 128, 6, 16);
        for (int j = 0; j < 16; ++j) CHECK(idx[q * 16 + j] == expect[j]);
    }
}

TEST_CASE("build_groups separates well-separated clusters") {
    Rng gen(46);
    SplatSet s = two_cluster_set(gen);
    FeatureSelection sel = FeatureSelection::make("C", "C");
    GroupedSplats g = build_groups(s, sel, 2, 32, 32, 5);
    for (int gi = 0; gi < 2; ++gi) {
        const bool low = g.neighbor_indices[gi * 32] < 32;
        for (int j = 0; j < 32; ++j)
            CHECK((g.neighbor_indices[gi * 32 + j] < 32) == low);
    }
}

TEST_CASE("build_groups with opacity produces opacity-pure groups at identical positions") {
    SplatSet s = SplatSet::with_size(32);
    Rng gen(47);
    for (int i = 0; i < 32; ++i) {
        // all splats collapse to one point; opacity is bimodal
        s.opacities[i] = i % 2 == 0 ? 0.1 : 0.9;
    }
    FeatureSelection sel = FeatureSelection::make("C,O", "C");
    GroupedSplats g = build_groups(s, sel, 2, 16, 16, 3);
    for (int gi = 0; gi < 2; ++gi) {
        const double first = s.opacities[g.neighbor_indices[gi * 16]];
        for (int j = 0; j < 16; ++j)
            CHECK(s.opacities[g.neighbor_indices[gi * 16 + j]] == first);
    }
}

TEST_CASE("group_size one gives singleton groups with zero local centroid") {
    Rng gen(48);
    SplatSet s = random_splat_set(20, gen);
    FeatureSelection sel = FeatureSelection::make("C", "C,O");
    GroupedSplats g = build_groups(s, sel, 5, 1, 4, 11);
    for (int i = 0; i < 5; ++i) {
        CHECK(g.neighbor_indices[i] == g.center_indices[i]);
        for (int d = 0; d < 3; ++d) CHECK(g.local_embed[i * g.f_e + d] == 0.0);
    }
}

TEST_CASE("every group's first neighbor is its center, local centroid zero") {
    Rng gen(49);
    SplatSet s = random_splat_set(100, gen);
    FeatureSelection sel = FeatureSelection::make("C,O,S", "C,O");
    GroupedSplats g = build_groups(s, sel, 8, 12, 24, 9);
    for (int i = 0; i < 8; ++i) {
        CHECK(g.neighbor_indices[i * 12] == g.center_indices[i]);
        for (int d = 0; d < 3; ++d) CHECK(g.local_embed[(i * 12) * g.f_e + d] == 0.0);
        for (int j = 0; j < 12; ++j) {
            const auto idx = g.neighbor_indices[i * 12 + j];
            CHECK(idx >= 0);
            CHECK(idx < 100);
        }
    }
    // raw_embed holds un-recentred values
    const auto c0 = g.center_indices[0];
    CHECK(g.raw_embed[0] == s.centroids[c0 * 3]);
}

TEST_CASE("build_groups permutation invariance in content-deterministic mode") {
    Rng gen(50);
    SplatSet s = random_splat_set(40, gen);
    FeatureSelection sel = FeatureSelection::make("C,O", "C");
    GroupingOptions opts;
    opts.content_deterministic = true;
    GroupedSplats a = build_groups(s, sel, 4, 8, 8, 123, opts);

    // permute the splats
    std::vector<std::int64_t> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 39; i > 0; --i)
        std::swap(perm[i], perm[draw_below(gen, i + 1)]);
    SplatSet ps = SplatSet::with_size(40);
    for (int i = 0; i < 40; ++i) {
        for (int d = 0; d < 3; ++d) {
            ps.centroids[perm[i] * 3 + d] = s.centroids[i * 3 + d];
            ps.scales[perm[i] * 3 + d] = s.scales[i * 3 + d];
        }
        ps.opacities[perm[i]] = s.opacities[i];
        for (int d = 0; d < 4; ++d) ps.rotations[perm[i] * 4 + d] = s.rotations[i * 4 + d];
        for (int d = 0; d < 48; ++d) ps.sh[perm[i] * 48 + d] = s.sh[i * 48 + d];
    }
    GroupedSplats b = build_groups(ps, sel, 4, 8, 8, 123, opts);

    // same groups up to relabeling through the permutation
    for (int i = 0; i < 4; ++i) {
        CHECK(b.center_indices[i] == perm[a.center_indices[i]]);
        std::multiset<std::int64_t> ga, gb;
        for (int j = 0; j < 8; ++j) {
            ga.insert(perm[a.neighbor_indices[i * 8 + j]]);
            gb.insert(b.neighbor_indices[i * 8 + j]);
        }
        CHECK(ga == gb);
    }
}

TEST_CASE("grouping on opacity lowers intra-group opacity variance") {
    Rng gen(51);
    for (int trial = 0; trial < 5; ++trial) {
        SplatSet s = random_splat_set(256, gen);
        // bimodal opacity independent of position
        for (int i = 0; i < 256; ++i)
            s.opacities[i] = draw_unit(gen) < 0.5 ? draw_range(gen, 0.05, 0.15)
                                                  : draw_range(gen, 0.85, 0.95);
        FeatureSelection with_o = FeatureSelection::make("C,O", "C");
        FeatureSelection without_o = FeatureSelection::make("C", "C");
        GroupedSplats go = build_groups(s, with_o, 16, 16, 16, trial);
        GroupedSplats gc = build_groups(s, without_o, 16, 16, 16, trial);
        CHECK(intra_group_opacity_variance(s, go) < intra_group_opacity_variance(s, gc));
    }
}

TEST_CASE("build_groups propagates invalid-input errors") {
    Rng gen(52);
    SplatSet s = random_splat_set(10, gen);
    FeatureSelection sel = FeatureSelection::make("C", "C");
    CHECK_THROWS_AS(build_groups(s, sel, 11, 4, 4, 0), InvalidInputError);
    CHECK_THROWS_AS(build_groups(s, sel, 2, 11, 4, 0), InvalidInputError);
}
