#pragma once

#include <map>
#include <string>
#include <vector>

#include "gsmae/splat.hpp"

namespace gsmae {

enum class ParamBlock { Centroid, Opacity, Scale, Rotation, Sh };

// Dim of a block when used for grouping distances (Sh contributes only its
// 3 base coefficients) and when used as an embedding/reconstruction target
// (full 48 Sh values).
std::int64_t block_grouping_dim(ParamBlock b);
std::int64_t block_embedding_dim(ParamBlock b);
const char* block_name(ParamBlock b);
std::vector<ParamBlock> parse_blocks(const std::string& csv); // "C,O,S" etc.
std::string blocks_to_string(const std::vector<ParamBlock>& blocks);

// Which splat parameters define grouping distances (G) and which are
// tokenized and reconstructed (E). Blocks are kept in canonical C,O,S,R,SH
// order; grouping weights rescale each block's normalized values.
struct FeatureSelection {
    std::vector<ParamBlock> grouping;
    std::vector<ParamBlock> embedding;
    std::map<ParamBlock, double> grouping_weights;

    static FeatureSelection make(const std::string& grouping_csv, const std::string& embedding_csv);
    std::int64_t grouping_dim() const;
    std::int64_t embedding_dim() const;
    double weight(ParamBlock b) const;
    void validate() const;
};

// Per-block normalization into a shared feature space: every block except
// rotation is recentered to zero mean and divided by its maximum row norm
// (left at zero when degenerate); rotations pass through unchanged. Blocks
// are concatenated after scaling by their grouping weight.
std::vector<double> normalize_features(const SplatSet& set,
                                       const std::vector<ParamBlock>& blocks,
                                       const std::map<ParamBlock, double>& weights = {});

// Raw embedding-feature rows (no normalization; full Sh).
std::vector<double> embedding_features(const SplatSet& set,
                                       const std::vector<ParamBlock>& blocks);

// Byte offset (in doubles) of each block within a feature row.
std::vector<std::int64_t> embedding_block_offsets(const std::vector<ParamBlock>& blocks);

struct FpsOptions {
    // Replace the seeded start and index tie-breaks with content-derived
    // rules, making the selected points independent of input order.
    bool content_deterministic = false;
};

// Greedy farthest-point sampling. The first index is drawn from the seed;
// each following pick maximizes its distance to the chosen set, breaking
// ties toward the lowest index.
std::vector<std::int64_t> fps(const std::vector<double>& points, std::int64_t p, std::int64_t d,
                              std::int64_t n, std::uint64_t seed, const FpsOptions& opts = {});

// Exact k-nearest-neighbor indices per query, ascending by distance, ties
// toward the lowest index.
std::vector<std::int64_t> knn(const std::vector<double>& queries, std::int64_t m,
                              const std::vector<double>& points, std::int64_t p, std::int64_t d,
                              std::int64_t k);

struct GroupingOptions {
    bool centroid_only_fps = false; // FPS over the normalized centroid block only
    bool pooling_in_gspace = false; // potential-neighbor search in G-space instead of centroids
    bool content_deterministic = false;
};

// Splats split into n groups of group_size, plus P potential neighbors per
// group for the pooling stage. local_embed recenters the centroid block to
// the group center; raw_embed keeps world values (reconstruction truth).
struct GroupedSplats {
    std::int64_t p = 0;          // downsampled splat count
    std::int64_t n = 0;          // groups
    std::int64_t group_size = 0;
    std::int64_t potential = 0;  // P
    std::int64_t f_g = 0, f_e = 0;

    std::vector<std::int64_t> center_indices;   // n
    std::vector<std::int64_t> neighbor_indices; // n*group_size, first is the center
    std::vector<std::int64_t> pooling_indices;  // n*potential
    std::vector<double> grouping_centers;       // n*f_g, normalized G rows of the centers
    std::vector<double> center_positions;       // n*3, raw centroids of the centers
    std::vector<double> local_embed;            // n*group_size*f_e
    std::vector<double> raw_embed;              // n*group_size*f_e
    std::vector<double> pooling_embed;          // n*potential*f_e, centroid block recentered
};

GroupedSplats build_groups(const SplatSet& set, const FeatureSelection& selection,
                           std::int64_t n, std::int64_t group_size, std::int64_t potential,
                           std::uint64_t seed, const GroupingOptions& opts = {});

} // namespace gsmae
