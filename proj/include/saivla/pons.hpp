#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "saivla/matrix.hpp"

namespace saivla {

// Which backbone layer a feature block came from.
enum class LayerId : std::uint8_t { Early = 0, Mid = 1, Late = 2 };

const char* layer_id_name(LayerId id);

// One backbone layer's token block, T^(l) x d^(l).
struct LayerFeatures {
    LayerId layer_id = LayerId::Early;
    Matrix tokens;
};

// Per-layer weights for one projection + GLU gate.
struct PonsLayerParams {
    Matrix proj_w;               // d^(l) x d_model
    std::vector<double> proj_b;  // d_model
    Matrix gate_w;               // d_model x d_model
    std::vector<double> gate_b;  // d_model
};

struct PonsParams {
    std::size_t d_model = 0;
    std::size_t n_context = 0;  // rows of the pooled output
    std::vector<PonsLayerParams> layers;
    Matrix pool_queries;         // n_context x d_model
    Matrix key_w;                // d_model x d_model
    Matrix value_w;              // d_model x d_model
    std::vector<double> ln_gamma;
    std::vector<double> ln_beta;

    // Random init for tests and the synthetic pipeline; scale is the
    // uniform half-width for weights.
    static PonsParams random(std::size_t n_context, std::size_t d_model,
                             const std::vector<std::size_t>& layer_dims,
                             std::uint64_t seed, double scale = 0.2);
};

// Fixed-length pooled context block, always n_context x d_model.
struct ContextTokens {
    Matrix tokens;
};

// h W_l + b_l for the layer's projection.
Matrix project_layer(const LayerFeatures& h, const PonsParams& params);

// GLU-gate each projected block (x * sigmoid(x W_g + b_g)), then stack the
// blocks row-wise. Gate weights are matched to blocks by position.
Matrix fuse_layers(const std::vector<Matrix>& projected, const PonsParams& params);

struct PoolResult {
    ContextTokens context;
    Matrix attention;  // n_context x T, rows sum to 1
};

PoolResult attention_pool(const Matrix& fused, const PonsParams& params);

// project -> fuse -> pool for a full multi-layer feature set.
PoolResult pons_forward(const std::vector<LayerFeatures>& features,
                        const PonsParams& params);

}  // namespace saivla
