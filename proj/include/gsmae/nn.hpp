#pragma once

#include <string>
#include <vector>

#include "gsmae/tensor.hpp"

namespace gsmae {

struct ParamRef {
    std::string name;
    Tensor tensor;
};
using ParamList = std::vector<ParamRef>;

// Forward-pass context. Stochastic pieces (drop path, dropout) are active
// only when training is set and draw from the provided generator.
struct FwdCtx {
    bool training = false;
    Rng* gen = nullptr;
};

inline FwdCtx eval_ctx() { return FwdCtx{}; }

// Shared affine map over the last axis: x (..., in) -> (..., out).
struct Linear {
    Tensor w; // (in, out)
    Tensor b; // (out)

    static Linear init(std::int64_t in, std::int64_t out, Rng& gen, double stddev = 0.02);
    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

// Two-layer shared map with GELU in between, applied per item over the
// last axis.
struct PointwiseMlp {
    Linear fc1, fc2;

    static PointwiseMlp init(std::int64_t in, std::int64_t hidden, std::int64_t out, Rng& gen);
    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNorm {
    Tensor gamma, beta; // (dim)
    double eps = 1e-5;

    static LayerNorm init(std::int64_t dim);
    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

struct MultiHeadAttention {
    Linear wq, wk, wv, proj;
    std::int64_t heads = 0;

    static MultiHeadAttention init(std::int64_t dim, std::int64_t heads, Rng& gen);
    // x: (B, N, dim) -> (B, N, dim), full self-attention over N.
    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

// Pre-norm residual block: x + drop(attn(norm(x))), then x + drop(mlp(norm(x))).
struct TransformerBlock {
    LayerNorm norm1, norm2;
    MultiHeadAttention attn;
    PointwiseMlp mlp;
    double drop_path_rate = 0.0;

    static TransformerBlock init(std::int64_t dim, std::int64_t heads, double mlp_ratio,
                                 double drop_path_rate, Rng& gen);
    Tensor operator()(const Tensor& x, const FwdCtx& ctx) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

struct TransformerStack {
    std::vector<TransformerBlock> blocks;
    LayerNorm final_norm;

    static TransformerStack init(std::int64_t dim, std::int64_t depth, std::int64_t heads,
                                 double mlp_ratio, double drop_path_rate, Rng& gen);
    // Returns final_norm(block_depth(...block_1(x))). When taps is non-null
    // it receives each block's raw output in order.
    Tensor forward(const Tensor& x, const FwdCtx& ctx, std::vector<Tensor>* taps = nullptr) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

// Stochastic depth over the residual branch: per-sample keep mask scaled by
// 1/(1-rate) in training, identity in evaluation.
Tensor drop_path(const Tensor& branch, double rate, const FwdCtx& ctx);

// Elementwise dropout, seeded through ctx, identity in evaluation.
Tensor dropout(const Tensor& x, double rate, const FwdCtx& ctx);

// Numerically stable log(sum(exp(x))) over the last axis, keepdim.
Tensor logsumexp_last(const Tensor& x);

// Mean cross-entropy of logits (B, C) against integer labels.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::int64_t>& labels);

} // namespace gsmae
