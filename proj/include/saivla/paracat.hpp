#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "saivla/decoder.hpp"  // Ternary
#include "saivla/matrix.hpp"
#include "saivla/numerics.hpp"

namespace saivla {

struct HeadConfig {
    std::size_t depth = 6;        // transformer blocks
    std::size_t d_model = 1024;
    std::size_t heads = 8;
    std::size_t chunk_steps = 20;  // K
    std::size_t action_dims = 16;  // D
    double mlp_ratio = 4.0;
    std::size_t max_image_tokens = 256;  // positional table sizes
    std::size_t max_text_tokens = 64;

    std::size_t query_count() const { return chunk_steps * action_dims; }
    std::size_t mlp_hidden() const {
        return static_cast<std::size_t>(mlp_ratio * static_cast<double>(d_model));
    }
    void validate() const;
};

// One pre-LN encoder block: x += attn(LN1(x)); x += mlp(LN2(x)).
// Keys carry no bias: a shared key offset shifts every attention score in a
// row by the same amount, which the softmax cancels exactly.
struct BlockParams {
    std::vector<double> ln1_gamma, ln1_beta;
    std::vector<double> ln2_gamma, ln2_beta;
    Matrix wq, wk, wv, wo;  // d_model x d_model
    std::vector<double> bq, bv, bo;
    Matrix mlp_w1;  // d_model x hidden
    std::vector<double> mlp_b1;
    Matrix mlp_w2;  // hidden x d_model
    std::vector<double> mlp_b2;
};

enum class Modality : std::size_t { Brain = 0, Image = 1, Text = 2, State = 3, Action = 4 };
inline constexpr std::size_t kModalityCount = 5;

struct HeadParams {
    Matrix queries;          // (K*D) x d_model, k-major
    Matrix modality_embed;   // 5 x d_model
    Matrix pos_image;        // max_image_tokens x d_model
    Matrix pos_text;         // max_text_tokens x d_model
    std::vector<BlockParams> blocks;
    std::vector<double> lnf_gamma, lnf_beta;  // final norm before readout
    Matrix w_out;            // d_model x 3
    std::vector<double> b_out;  // 3

    static HeadParams random(const HeadConfig& cfg, std::uint64_t seed,
                             double init_std = 0.02);
    static HeadParams zeros_like(const HeadParams& other);

    std::size_t parameter_count() const;
    bool all_finite() const;
};

// Fixed visitation order over every parameter buffer; the optimizer and the
// gradient checker rely on this order being identical across same-shaped
// instances.
template <typename Params, typename F>
void visit_param_buffers(Params& p, F&& f) {
    f(p.queries.data);
    f(p.modality_embed.data);
    f(p.pos_image.data);
    f(p.pos_text.data);
    for (auto& b : p.blocks) {
        f(b.ln1_gamma);
        f(b.ln1_beta);
        f(b.ln2_gamma);
        f(b.ln2_beta);
        f(b.wq.data);
        f(b.bq);
        f(b.wk.data);
        f(b.wv.data);
        f(b.bv);
        f(b.wo.data);
        f(b.bo);
        f(b.mlp_w1.data);
        f(b.mlp_b1);
        f(b.mlp_w2.data);
        f(b.mlp_b2);
    }
    f(p.lnf_gamma);
    f(p.lnf_beta);
    f(p.w_out.data);
    f(p.b_out);
}

struct TokenBundle {
    Matrix context;  // Nc x d_model (pooled brain tokens)
    Matrix image;    // T_V x d_model
    Matrix text;     // T_W x d_model
    Matrix state;    // 1 x d_model
};

struct ActionChunk {
    std::size_t chunk_steps = 0;
    std::size_t action_dims = 0;
    Matrix logits;                  // (K*D) x 3
    std::vector<ProbVector3> probs; // K*D, softmax at tau = 1
    std::vector<Ternary> decisions; // optional, empty until decoded

    double logit(std::size_t k, std::size_t j, std::size_t c) const {
        return logits(k * action_dims + j, c);
    }
    const ProbVector3& prob(std::size_t k, std::size_t j) const {
        return probs[k * action_dims + j];
    }
};

struct ForwardStats {
    std::size_t block_evals = 0;
};

// One pass yields logits for every (k, j) cell; no sequential decoding.
ActionChunk paracat_forward(const TokenBundle& bundle, const HeadParams& params,
                            const HeadConfig& cfg, ForwardStats* stats = nullptr);

struct LossWeights {
    std::vector<double> dim_weights;            // per-dimension w_j; empty = all 1
    std::array<double, 3> class_weights{1, 1, 1};  // optional per-class factors
    double label_smoothing = 0.0;  // epsilon in [0, 0.5)
    double lambda_entropy = 0.0;
    double lambda_temporal = 0.0;

    void validate(std::size_t dims) const;
    double dim_weight(std::size_t j) const {
        return dim_weights.empty() ? 1.0 : dim_weights[j];
    }
};

struct LossBreakdown {
    double total = 0.0;
    double ce = 0.0;
    double entropy = 0.0;  // sum of H(p) over cells (unweighted by lambda)
    double temporal = 0.0; // sum of KL(p_k || stop(p_{k-1})) over k>=2
};

// Class-weighted smoothed cross-entropy + entropy and temporal-KL penalties.
// Smoothing puts 1-eps on the true class plus eps/3 spread over all three.
// The temporal target p_{k-1} is a constant (stop-gradient).
LossBreakdown paracat_loss(const ActionChunk& chunk,
                           const std::vector<std::vector<Ternary>>& labels,
                           const LossWeights& lw);

// Forward + loss + reverse-mode parameter gradients accumulated into grads
// (grads must be zeros_like-shaped; contributions are added).
LossBreakdown paracat_loss_grad(const TokenBundle& bundle,
                                const std::vector<std::vector<Ternary>>& labels,
                                const LossWeights& lw, const HeadParams& params,
                                const HeadConfig& cfg, HeadParams& grads);

// Central-difference verification of the analytic gradient on a sampled
// coordinate subset. Returns the max relative error with denominator
// max(|g|, 1e-8).
double grad_check(const HeadParams& params, const HeadConfig& cfg,
                  const TokenBundle& bundle,
                  const std::vector<std::vector<Ternary>>& labels,
                  const LossWeights& lw, double h = 1e-5,
                  std::size_t sample_coords = 256, std::uint64_t seed = 0);

}  // namespace saivla
