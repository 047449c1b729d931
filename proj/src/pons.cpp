#include "saivla/pons.hpp"

#include <cmath>

#include "saivla/errors.hpp"
#include "saivla/numerics.hpp"

namespace saivla {

const char* layer_id_name(LayerId id) {
    switch (id) {
        case LayerId::Early: return "early";
        case LayerId::Mid: return "mid";
        case LayerId::Late: return "late";
    }
    return "unknown";
}

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                     double scale) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

}  // namespace

PonsParams PonsParams::random(std::size_t n_context, std::size_t d_model,
                              const std::vector<std::size_t>& layer_dims,
                              std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    PonsParams p;
    p.d_model = d_model;
    p.n_context = n_context;
    for (std::size_t d : layer_dims) {
        PonsLayerParams lp;
        lp.proj_w = random_matrix(rng, d, d_model, scale);
        lp.proj_b = random_vector(rng, d_model, scale);
        lp.gate_w = random_matrix(rng, d_model, d_model, scale);
        lp.gate_b = random_vector(rng, d_model, scale);
        p.layers.push_back(std::move(lp));
    }
    p.pool_queries = random_matrix(rng, n_context, d_model, scale);
    p.key_w = random_matrix(rng, d_model, d_model, scale);
    p.value_w = random_matrix(rng, d_model, d_model, scale);
    p.ln_gamma.assign(d_model, 1.0);
    p.ln_beta.assign(d_model, 0.0);
    return p;
}

Matrix project_layer(const LayerFeatures& h, const PonsParams& params) {
    const std::size_t idx = static_cast<std::size_t>(h.layer_id);
    if (idx >= params.layers.size()) {
        throw InvalidArgument("project_layer: no parameters for layer id");
    }
    const PonsLayerParams& lp = params.layers[idx];
    if (h.tokens.cols != lp.proj_w.rows) {
        throw InvalidArgument("project_layer: feature width does not match projection");
    }
    if (h.tokens.rows == 0) throw InvalidArgument("project_layer: empty token block");
    Matrix out = matmul(h.tokens, lp.proj_w);
    add_row_bias(out, lp.proj_b);
    return out;
}

Matrix fuse_layers(const std::vector<Matrix>& projected, const PonsParams& params) {
    if (projected.empty()) throw InvalidArgument("fuse_layers: empty layer list");
    if (projected.size() > params.layers.size()) {
        throw InvalidArgument("fuse_layers: more blocks than gate parameter sets");
    }
    std::vector<Matrix> gated;
    gated.reserve(projected.size());
    for (std::size_t l = 0; l < projected.size(); ++l) {
        const Matrix& x = projected[l];
        if (x.cols != params.d_model) {
            throw InvalidArgument("fuse_layers: block width != d_model");
        }
        Matrix gate = matmul(x, params.layers[l].gate_w);
        add_row_bias(gate, params.layers[l].gate_b);
        Matrix g(x.rows, x.cols);
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            g.data[i] = x.data[i] * sigmoid(gate.data[i]);
        }
        gated.push_back(std::move(g));
    }
    return vcat(gated);
}

PoolResult attention_pool(const Matrix& fused, const PonsParams& params) {
    if (fused.rows == 0) throw InvalidArgument("attention_pool: zero-row input");
    if (fused.cols != params.d_model) {
        throw InvalidArgument("attention_pool: input width != d_model");
    }
    const Matrix keys = matmul(fused, params.key_w);
    const Matrix values = matmul(fused, params.value_w);

    Matrix scores = matmul_bt(params.pool_queries, keys);  // n_context x T
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(params.d_model));
    for (double& v : scores.data) v *= inv_scale;

    Matrix attn(scores.rows, scores.cols);
    for (std::size_t r = 0; r < scores.rows; ++r) {
        std::vector<double> row(scores.row(r), scores.row(r) + scores.cols);
        const std::vector<double> p = softmax_temp(row, 1.0);
        std::copy(p.begin(), p.end(), attn.row(r));
    }

    Matrix pooled = matmul(attn, values);
    layer_norm_rows(pooled, params.ln_gamma, params.ln_beta);

    PoolResult out;
    out.context.tokens = std::move(pooled);
    out.attention = std::move(attn);
    return out;
}

PoolResult pons_forward(const std::vector<LayerFeatures>& features,
                        const PonsParams& params) {
    if (features.empty()) throw InvalidArgument("pons_forward: no feature blocks");
    std::vector<Matrix> projected;
    projected.reserve(features.size());
    for (const LayerFeatures& f : features) {
        projected.push_back(project_layer(f, params));
    }
    return attention_pool(fuse_layers(projected, params), params);
}

}  // namespace saivla
