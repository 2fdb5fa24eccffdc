#include "gsmae/nn.hpp"

#include <cmath>

namespace gsmae {

Linear Linear::init(std::int64_t in, std::int64_t out, Rng& gen, double stddev) {
    Linear l;
    l.w = Tensor::randn({in, out}, gen, stddev, true);
    l.b = Tensor::zeros({out}, true);
    return l;
}

Tensor Linear::operator()(const Tensor& x) const { return add(matmul(x, w), b); }

void Linear::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

PointwiseMlp PointwiseMlp::init(std::int64_t in, std::int64_t hidden, std::int64_t out, Rng& gen) {
    PointwiseMlp m;
    m.fc1 = Linear::init(in, hidden, gen);
    m.fc2 = Linear::init(hidden, out, gen);
    return m;
}

Tensor PointwiseMlp::operator()(const Tensor& x) const { return fc2(gelu(fc1(x))); }

void PointwiseMlp::collect(const std::string& prefix, ParamList& out) const {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
}

LayerNorm LayerNorm::init(std::int64_t dim) {
    LayerNorm n;
    n.gamma = Tensor::full({dim}, 1.0, true);
    n.beta = Tensor::zeros({dim}, true);
    return n;
}

Tensor LayerNorm::operator()(const Tensor& x) const {
    Tensor centered = sub(x, mean(x, -1, true));
    Tensor var = mean(mul(centered, centered), -1, true);
    Tensor normed = div(centered, sqrt(add_scalar(var, eps)));
    return add(mul(normed, gamma), beta);
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

MultiHeadAttention MultiHeadAttention::init(std::int64_t dim, std::int64_t heads, Rng& gen) {
    if (heads <= 0 || dim % heads != 0)
        throw ConfigError("attention: dim " + std::to_string(dim) +
                          " not divisible by head count " + std::to_string(heads));
    MultiHeadAttention a;
    a.wq = Linear::init(dim, dim, gen);
    a.wk = Linear::init(dim, dim, gen);
    a.wv = Linear::init(dim, dim, gen);
    a.proj = Linear::init(dim, dim, gen);
    a.heads = heads;
    return a;
}

Tensor MultiHeadAttention::operator()(const Tensor& x) const {
    const std::int64_t B = x.dim(0);
    const std::int64_t N = x.dim(1);
    const std::int64_t D = x.dim(2);
    const std::int64_t H = heads;
    const std::int64_t hd = D / H;

    auto split_heads = [&](const Tensor& t) {
        // (B, N, D) -> (B, H, N, hd)
        return transpose(reshape(t, {B, N, H, hd}), 1, 2);
    };
    Tensor q = split_heads(wq(x));
    Tensor k = split_heads(wk(x));
    Tensor v = split_heads(wv(x));

    Tensor scores = mul_scalar(matmul(q, transpose(k, -1, -2)), 1.0 / std::sqrt(double(hd)));
    Tensor att = softmax_over_axis(scores, -1);
    Tensor ctx = matmul(att, v);                          // (B, H, N, hd)
    Tensor merged = reshape(transpose(ctx, 1, 2), {B, N, D});
    return proj(merged);
}

void MultiHeadAttention::collect(const std::string& prefix, ParamList& out) const {
    wq.collect(prefix + ".wq", out);
    wk.collect(prefix + ".wk", out);
    wv.collect(prefix + ".wv", out);
    proj.collect(prefix + ".proj", out);
}

TransformerBlock TransformerBlock::init(std::int64_t dim, std::int64_t heads, double mlp_ratio,
                                        double drop_path_rate, Rng& gen) {
    TransformerBlock b;
    b.norm1 = LayerNorm::init(dim);
    b.norm2 = LayerNorm::init(dim);
    b.attn = MultiHeadAttention::init(dim, heads, gen);
    b.mlp = PointwiseMlp::init(dim, static_cast<std::int64_t>(dim * mlp_ratio), dim, gen);
    b.drop_path_rate = drop_path_rate;
    return b;
}

Tensor TransformerBlock::operator()(const Tensor& x, const FwdCtx& ctx) const {
    Tensor h = add(x, drop_path(attn(norm1(x)), drop_path_rate, ctx));
    return add(h, drop_path(mlp(norm2(h)), drop_path_rate, ctx));
}

void TransformerBlock::collect(const std::string& prefix, ParamList& out) const {
    norm1.collect(prefix + ".norm1", out);
    attn.collect(prefix + ".attn", out);
    norm2.collect(prefix + ".norm2", out);
    mlp.collect(prefix + ".mlp", out);
}

TransformerStack TransformerStack::init(std::int64_t dim, std::int64_t depth, std::int64_t heads,
                                        double mlp_ratio, double drop_path_rate, Rng& gen) {
    TransformerStack s;
    for (std::int64_t i = 0; i < depth; ++i)
        s.blocks.push_back(TransformerBlock::init(dim, heads, mlp_ratio, drop_path_rate, gen));
    s.final_norm = LayerNorm::init(dim);
    return s;
}

Tensor TransformerStack::forward(const Tensor& x, const FwdCtx& ctx,
                                 std::vector<Tensor>* taps) const {
    Tensor h = x;
    for (const auto& block : blocks) {
        h = block(h, ctx);
        if (taps) taps->push_back(h);
    }
    return final_norm(h);
}

void TransformerStack::collect(const std::string& prefix, ParamList& out) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
        blocks[i].collect(prefix + ".block" + std::to_string(i), out);
    final_norm.collect(prefix + ".final_norm", out);
}

Tensor drop_path(const Tensor& branch, double rate, const FwdCtx& ctx) {
    if (!ctx.training || rate <= 0.0) return branch;
    if (!ctx.gen) throw ConfigError("drop_path: training mode requires a generator");
    const std::int64_t B = branch.dim(0);
    std::vector<double> mask(B);
    const double keep = 1.0 - rate;
    for (auto& m : mask) m = draw_unit(*ctx.gen) < keep ? 1.0 / keep : 0.0;
    Shape mshape(branch.ndim(), 1);
    mshape[0] = B;
    return mul(branch, Tensor::from_data(mshape, std::move(mask)));
}

Tensor dropout(const Tensor& x, double rate, const FwdCtx& ctx) {
    if (!ctx.training || rate <= 0.0) return x;
    if (!ctx.gen) throw ConfigError("dropout: training mode requires a generator");
    std::vector<double> mask(x.numel());
    const double keep = 1.0 - rate;
    for (auto& m : mask) m = draw_unit(*ctx.gen) < keep ? 1.0 / keep : 0.0;
    return mul(x, Tensor::from_data(x.shape(), std::move(mask)));
}

Tensor logsumexp_last(const Tensor& x) {
    Tensor mx = max_over_axis(x, -1, true);
    Tensor shifted = sub(x, mx);
    return add(log(sum(exp(shifted), -1, true)), mx);
}

Tensor cross_entropy(const Tensor& logits, const std::vector<std::int64_t>& labels) {
    if (logits.ndim() != 2) throw ShapeError("cross_entropy: logits must be (batch, classes)");
    const std::int64_t B = logits.dim(0);
    if (static_cast<std::int64_t>(labels.size()) != B)
        throw InvalidInputError("cross_entropy: label count does not match batch size");
    std::vector<std::vector<std::int64_t>> pick(B);
    for (std::int64_t b = 0; b < B; ++b) {
        if (labels[b] < 0 || labels[b] >= logits.dim(1))
            throw DataError("cross_entropy: label " + std::to_string(labels[b]) +
                            " out of range for " + std::to_string(logits.dim(1)) + " classes");
        pick[b] = {labels[b]};
    }
    Tensor lse = logsumexp_last(logits);            // (B, 1)
    Tensor picked = gather_rows(logits, pick);      // (B, 1)
    return mean(sub(lse, picked));
}

} // namespace gsmae
