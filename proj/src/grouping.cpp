#include "gsmae/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace gsmae {

namespace {

constexpr ParamBlock kCanonical[] = {ParamBlock::Centroid, ParamBlock::Opacity, ParamBlock::Scale,
                                     ParamBlock::Rotation, ParamBlock::Sh};

// FNV-1a over a row of doubles; rows are combined by addition so the digest
// is independent of row order.
std::uint64_t row_hash(const double* row, std::int64_t d) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t i = 0; i < d; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &row[i], 8);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (b * 8)) & 0xff;
            h *= 1099511628211ull;
        }
    }
    return h;
}

bool row_less(const double* a, const double* b, std::int64_t d) {
    for (std::int64_t i = 0; i < d; ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return false;
}

} // namespace

std::int64_t block_grouping_dim(ParamBlock b) {
    switch (b) {
    case ParamBlock::Centroid: return 3;
    case ParamBlock::Opacity: return 1;
    case ParamBlock::Scale: return 3;
    case ParamBlock::Rotation: return 4;
    case ParamBlock::Sh: return 3; // base coefficients only
    }
    return 0;
}

std::int64_t block_embedding_dim(ParamBlock b) {
    return b == ParamBlock::Sh ? 48 : block_grouping_dim(b);
}

const char* block_name(ParamBlock b) {
    switch (b) {
    case ParamBlock::Centroid: return "C";
    case ParamBlock::Opacity: return "O";
    case ParamBlock::Scale: return "S";
    case ParamBlock::Rotation: return "R";
    case ParamBlock::Sh: return "SH";
    }
    return "?";
}

std::vector<ParamBlock> parse_blocks(const std::string& csv) {
    std::vector<ParamBlock> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::string t;
        for (char c : tok)
            if (!std::isspace(static_cast<unsigned char>(c))) t += std::toupper(c);
        if (t.empty()) continue;
        if (t == "C") out.push_back(ParamBlock::Centroid);
        else if (t == "O") out.push_back(ParamBlock::Opacity);
        else if (t == "S") out.push_back(ParamBlock::Scale);
        else if (t == "R") out.push_back(ParamBlock::Rotation);
        else if (t == "SH") out.push_back(ParamBlock::Sh);
        else throw ConfigError("unknown parameter block '" + tok + "' (expected C,O,S,R,SH)");
    }
    // canonical order, duplicates dropped
    std::vector<ParamBlock> ordered;
    for (ParamBlock b : kCanonical)
        if (std::find(out.begin(), out.end(), b) != out.end()) ordered.push_back(b);
    return ordered;
}

std::string blocks_to_string(const std::vector<ParamBlock>& blocks) {
    std::string s;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (i) s += ",";
        s += block_name(blocks[i]);
    }
    return s;
}

FeatureSelection FeatureSelection::make(const std::string& grouping_csv,
                                        const std::string& embedding_csv) {
    FeatureSelection sel;
    sel.grouping = parse_blocks(grouping_csv);
    sel.embedding = parse_blocks(embedding_csv);
    sel.validate();
    return sel;
}

std::int64_t FeatureSelection::grouping_dim() const {
    std::int64_t d = 0;
    for (auto b : grouping) d += block_grouping_dim(b);
    return d;
}

std::int64_t FeatureSelection::embedding_dim() const {
    std::int64_t d = 0;
    for (auto b : embedding) d += block_embedding_dim(b);
    return d;
}

double FeatureSelection::weight(ParamBlock b) const {
    auto it = grouping_weights.find(b);
    return it == grouping_weights.end() ? 1.0 : it->second;
}

void FeatureSelection::validate() const {
    if (grouping.empty()) throw ConfigError("feature selection: grouping set must be nonempty");
    if (embedding.empty()) throw ConfigError("feature selection: embedding set must be nonempty");
    for (auto [b, w] : grouping_weights)
        if (!(w > 0.0) || !std::isfinite(w))
            throw ConfigError(std::string("feature selection: weight for ") + block_name(b) +
                              " must be positive");
}

namespace {

// Copies one block's raw values into rows of a p x dim column slab.
void fill_block(const SplatSet& set, ParamBlock b, std::vector<double>& out, std::int64_t p,
                std::int64_t row_dim, std::int64_t col_off, bool grouping_view) {
    const std::int64_t d = grouping_view ? block_grouping_dim(b) : block_embedding_dim(b);
    const double* src = nullptr;
    std::int64_t src_stride = 0;
    switch (b) {
    case ParamBlock::Centroid: src = set.centroids.data(); src_stride = 3; break;
    case ParamBlock::Opacity: src = set.opacities.data(); src_stride = 1; break;
    case ParamBlock::Scale: src = set.scales.data(); src_stride = 3; break;
    case ParamBlock::Rotation: src = set.rotations.data(); src_stride = 4; break;
    case ParamBlock::Sh: src = set.sh.data(); src_stride = 48; break;
    }
    for (std::int64_t i = 0; i < p; ++i)
        for (std::int64_t j = 0; j < d; ++j)
            out[i * row_dim + col_off + j] = src[i * src_stride + j];
}

} // namespace

std::vector<double> normalize_features(const SplatSet& set,
                                       const std::vector<ParamBlock>& blocks,
                                       const std::map<ParamBlock, double>& weights) {
    if (blocks.empty()) throw ConfigError("normalize_features: empty block selection");
    const std::int64_t p = set.size();
    if (p < 1) throw InvalidInputError("normalize_features: empty splat set");
    std::int64_t f = 0;
    for (auto b : blocks) f += block_grouping_dim(b);
    std::vector<double> out(p * f, 0.0);

    std::int64_t off = 0;
    for (auto b : blocks) {
        const std::int64_t d = block_grouping_dim(b);
        fill_block(set, b, out, p, f, off, true);
        if (b != ParamBlock::Rotation) {
            std::vector<double> column(p);
            for (std::int64_t j = 0; j < d; ++j) {
                for (std::int64_t i = 0; i < p; ++i) column[i] = out[i * f + off + j];
                // summing in sorted order keeps the mean independent of the
                // input permutation (bitwise), which the deterministic
                // grouping mode relies on
                std::sort(column.begin(), column.end());
                double m = 0.0;
                for (double v : column) m += v;
                m /= static_cast<double>(p);
                for (std::int64_t i = 0; i < p; ++i) out[i * f + off + j] -= m;
            }
            double max_norm = 0.0;
            for (std::int64_t i = 0; i < p; ++i) {
                double n2 = 0.0;
                for (std::int64_t j = 0; j < d; ++j) {
                    const double v = out[i * f + off + j];
                    n2 += v * v;
                }
                max_norm = std::max(max_norm, std::sqrt(n2));
            }
            if (max_norm >= 1e-12) {
                for (std::int64_t i = 0; i < p; ++i)
                    for (std::int64_t j = 0; j < d; ++j) out[i * f + off + j] /= max_norm;
            } else {
                for (std::int64_t i = 0; i < p; ++i)
                    for (std::int64_t j = 0; j < d; ++j) out[i * f + off + j] = 0.0;
            }
        }
        auto it = weights.find(b);
        if (it != weights.end() && it->second != 1.0) {
            for (std::int64_t i = 0; i < p; ++i)
                for (std::int64_t j = 0; j < d; ++j) out[i * f + off + j] *= it->second;
        }
        off += d;
    }
    return out;
}

std::vector<double> embedding_features(const SplatSet& set,
                                       const std::vector<ParamBlock>& blocks) {
    if (blocks.empty()) throw ConfigError("embedding_features: empty block selection");
    const std::int64_t p = set.size();
    std::int64_t f = 0;
    for (auto b : blocks) f += block_embedding_dim(b);
    std::vector<double> out(p * f, 0.0);
    std::int64_t off = 0;
    for (auto b : blocks) {
        fill_block(set, b, out, p, f, off, false);
        off += block_embedding_dim(b);
    }
    return out;
}

std::vector<std::int64_t> embedding_block_offsets(const std::vector<ParamBlock>& blocks) {
    std::vector<std::int64_t> offs;
    std::int64_t off = 0;
    for (auto b : blocks) {
        offs.push_back(off);
        off += block_embedding_dim(b);
    }
    return offs;
}

std::vector<std::int64_t> fps(const std::vector<double>& points, std::int64_t p, std::int64_t d,
                              std::int64_t n, std::uint64_t seed, const FpsOptions& opts) {
    if (p <= 0 || static_cast<std::int64_t>(points.size()) != p * d)
        throw InvalidInputError("fps: point buffer does not match p*d");
    if (n > p)
        throw InvalidInputError("fps: requested " + std::to_string(n) + " samples from " +
                                std::to_string(p) + " points");
    if (n <= 0) throw InvalidInputError("fps: sample count must be positive");

    std::int64_t first;
    if (opts.content_deterministic) {
        // pick by canonical (content-sorted) rank so permuting the input
        // selects the same point
        std::vector<std::int64_t> order(p);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
            return row_less(&points[a * d], &points[b * d], d);
        });
        std::uint64_t h = 0;
        for (std::int64_t i = 0; i < p; ++i) h += row_hash(&points[i * d], d);
        first = order[mix_seed(seed, h) % static_cast<std::uint64_t>(p)];
    } else {
        Rng gen(seed);
        first = static_cast<std::int64_t>(draw_below(gen, static_cast<std::uint64_t>(p)));
    }

    std::vector<std::int64_t> chosen{first};
    std::vector<double> min_d2(p);
    auto dist2 = [&](std::int64_t a, std::int64_t b) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double diff = points[a * d + j] - points[b * d + j];
            acc += diff * diff;
        }
        return acc;
    };
    for (std::int64_t i = 0; i < p; ++i) min_d2[i] = dist2(i, first);

    while (static_cast<std::int64_t>(chosen.size()) < n) {
        std::int64_t best = -1;
        double best_d2 = -1.0;
        for (std::int64_t i = 0; i < p; ++i) {
            const bool better =
                min_d2[i] > best_d2 ||
                (min_d2[i] == best_d2 && opts.content_deterministic && best >= 0 &&
                 row_less(&points[i * d], &points[best * d], d));
            if (better) {
                best = i;
                best_d2 = min_d2[i];
            }
        }
        chosen.push_back(best);
        for (std::int64_t i = 0; i < p; ++i) min_d2[i] = std::min(min_d2[i], dist2(i, best));
    }
    return chosen;
}

std::vector<std::int64_t> knn(const std::vector<double>& queries, std::int64_t m,
                              const std::vector<double>& points, std::int64_t p, std::int64_t d,
                              std::int64_t k) {
    if (static_cast<std::int64_t>(queries.size()) != m * d ||
        static_cast<std::int64_t>(points.size()) != p * d)
        throw InvalidInputError("knn: buffer sizes do not match m*d / p*d");
    if (k > p)
        throw InvalidInputError("knn: requested " + std::to_string(k) + " neighbors from " +
                                std::to_string(p) + " points");
    if (k <= 0) throw InvalidInputError("knn: neighbor count must be positive");

    std::vector<std::int64_t> out(m * k);
    std::vector<std::pair<double, std::int64_t>> cand(p);
    for (std::int64_t q = 0; q < m; ++q) {
        for (std::int64_t i = 0; i < p; ++i) {
            double acc = 0.0;
            for (std::int64_t j = 0; j < d; ++j) {
                const double diff = queries[q * d + j] - points[i * d + j];
                acc += diff * diff;
            }
            cand[i] = {acc, i};
        }
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        for (std::int64_t j = 0; j < k; ++j) out[q * k + j] = cand[j].second;
    }
    return out;
}

GroupedSplats build_groups(const SplatSet& set, const FeatureSelection& selection,
                           std::int64_t n, std::int64_t group_size, std::int64_t potential,
                           std::uint64_t seed, const GroupingOptions& opts) {
    selection.validate();
    const std::int64_t p = set.size();
    if (group_size > p)
        throw InvalidInputError("build_groups: group_size " + std::to_string(group_size) +
                                " exceeds splat count " + std::to_string(p));
    if (potential > p)
        throw InvalidInputError("build_groups: potential neighbors " + std::to_string(potential) +
                                " exceed splat count " + std::to_string(p));

    GroupedSplats g;
    g.p = p;
    g.n = n;
    g.group_size = group_size;
    g.potential = potential;
    g.f_g = selection.grouping_dim();
    g.f_e = selection.embedding_dim();

    const std::vector<double> gmat =
        normalize_features(set, selection.grouping, selection.grouping_weights);

    FpsOptions fps_opts;
    fps_opts.content_deterministic = opts.content_deterministic;
    if (opts.centroid_only_fps) {
        const std::vector<double> cmat = normalize_features(set, {ParamBlock::Centroid});
        g.center_indices = fps(cmat, p, 3, n, seed, fps_opts);
    } else {
        g.center_indices = fps(gmat, p, g.f_g, n, seed, fps_opts);
    }

    std::vector<double> center_rows(n * g.f_g);
    for (std::int64_t i = 0; i < n; ++i)
        std::copy_n(&gmat[g.center_indices[i] * g.f_g], g.f_g, &center_rows[i * g.f_g]);
    g.grouping_centers = center_rows;

    g.neighbor_indices = knn(center_rows, n, gmat, p, g.f_g, group_size);
    // the group must contain its own center in slot 0 even when another
    // splat ties it in G-space
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t* row = &g.neighbor_indices[i * group_size];
        const std::int64_t c = g.center_indices[i];
        auto pos = std::find(row, row + group_size, c);
        if (pos == row + group_size) {
            std::move_backward(row, row + group_size - 1, row + group_size);
            row[0] = c;
        } else if (pos != row) {
            std::rotate(row, pos, pos + 1);
        }
    }

    std::vector<double> center_query(n * 3);
    for (std::int64_t i = 0; i < n; ++i)
        std::copy_n(&set.centroids[g.center_indices[i] * 3], 3, &center_query[i * 3]);
    g.center_positions = center_query;

    if (opts.pooling_in_gspace) {
        g.pooling_indices = knn(center_rows, n, gmat, p, g.f_g, potential);
    } else {
        g.pooling_indices = knn(center_query, n, set.centroids, p, 3, potential);
    }

    const std::vector<double> emat = embedding_features(set, selection.embedding);
    const auto offsets = embedding_block_offsets(selection.embedding);
    std::int64_t c_off = -1;
    for (std::size_t i = 0; i < selection.embedding.size(); ++i)
        if (selection.embedding[i] == ParamBlock::Centroid) c_off = offsets[i];

    auto gather = [&](const std::vector<std::int64_t>& idx, std::int64_t count, bool recenter) {
        std::vector<double> out(n * count * g.f_e);
        for (std::int64_t i = 0; i < n; ++i) {
            const double* cpos = &set.centroids[g.center_indices[i] * 3];
            for (std::int64_t j = 0; j < count; ++j) {
                const double* src = &emat[idx[i * count + j] * g.f_e];
                double* dst = &out[(i * count + j) * g.f_e];
                std::copy_n(src, g.f_e, dst);
                if (recenter && c_off >= 0)
                    for (int dc = 0; dc < 3; ++dc) dst[c_off + dc] -= cpos[dc];
            }
        }
        return out;
    };
    g.local_embed = gather(g.neighbor_indices, group_size, true);
    g.raw_embed = gather(g.neighbor_indices, group_size, false);
    g.pooling_embed = gather(g.pooling_indices, potential, true);
    return g;
}

} // namespace gsmae
