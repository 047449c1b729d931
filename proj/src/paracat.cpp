#include "saivla/paracat.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "saivla/errors.hpp"

namespace saivla {

void HeadConfig::validate() const {
    if (depth < 1) throw InvalidArgument("HeadConfig: depth must be >= 1");
    if (d_model < 1 || heads < 1 || d_model % heads != 0) {
        throw InvalidArgument("HeadConfig: d_model must be divisible by heads");
    }
    if (chunk_steps < 1 || action_dims < 1) {
        throw InvalidArgument("HeadConfig: K and D must be >= 1");
    }
    if (!(mlp_ratio > 0.0)) throw InvalidArgument("HeadConfig: mlp_ratio must be positive");
}

void LossWeights::validate(std::size_t dims) const {
    if (!dim_weights.empty() && dim_weights.size() != dims) {
        throw InvalidArgument("LossWeights: dim_weights length != D");
    }
    for (double w : dim_weights) {
        if (!(w > 0.0)) throw InvalidArgument("LossWeights: dim weights must be positive");
    }
    for (double w : class_weights) {
        if (!(w > 0.0)) throw InvalidArgument("LossWeights: class weights must be positive");
    }
    if (label_smoothing < 0.0 || label_smoothing >= 0.5) {
        throw InvalidArgument("LossWeights: label smoothing must be in [0, 0.5)");
    }
    if (lambda_entropy < 0.0 || lambda_temporal < 0.0) {
        throw InvalidArgument("LossWeights: lambda terms must be nonnegative");
    }
}

namespace {

Matrix normal_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                     double std_dev) {
    std::normal_distribution<double> dist(0.0, std_dev);
    Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

}  // namespace

HeadParams HeadParams::random(const HeadConfig& cfg, std::uint64_t seed,
                              double init_std) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    HeadParams p;
    p.queries = normal_matrix(rng, cfg.query_count(), cfg.d_model, init_std);
    p.modality_embed = normal_matrix(rng, kModalityCount, cfg.d_model, init_std);
    p.pos_image = normal_matrix(rng, cfg.max_image_tokens, cfg.d_model, init_std);
    p.pos_text = normal_matrix(rng, cfg.max_text_tokens, cfg.d_model, init_std);
    const std::size_t hidden = cfg.mlp_hidden();
    for (std::size_t l = 0; l < cfg.depth; ++l) {
        BlockParams b;
        b.ln1_gamma.assign(cfg.d_model, 1.0);
        b.ln1_beta.assign(cfg.d_model, 0.0);
        b.ln2_gamma.assign(cfg.d_model, 1.0);
        b.ln2_beta.assign(cfg.d_model, 0.0);
        b.wq = normal_matrix(rng, cfg.d_model, cfg.d_model, init_std);
        b.wk = normal_matrix(rng, cfg.d_model, cfg.d_model, init_std);
        b.wv = normal_matrix(rng, cfg.d_model, cfg.d_model, init_std);
        b.wo = normal_matrix(rng, cfg.d_model, cfg.d_model, init_std);
        b.bq.assign(cfg.d_model, 0.0);
        b.bv.assign(cfg.d_model, 0.0);
        b.bo.assign(cfg.d_model, 0.0);
        b.mlp_w1 = normal_matrix(rng, cfg.d_model, hidden, init_std);
        b.mlp_b1.assign(hidden, 0.0);
        b.mlp_w2 = normal_matrix(rng, hidden, cfg.d_model, init_std);
        b.mlp_b2.assign(cfg.d_model, 0.0);
        p.blocks.push_back(std::move(b));
    }
    p.lnf_gamma.assign(cfg.d_model, 1.0);
    p.lnf_beta.assign(cfg.d_model, 0.0);
    p.w_out = normal_matrix(rng, cfg.d_model, 3, init_std);
    p.b_out.assign(3, 0.0);
    return p;
}

HeadParams HeadParams::zeros_like(const HeadParams& other) {
    HeadParams p = other;
    visit_param_buffers(p, [](std::vector<double>& buf) {
        std::fill(buf.begin(), buf.end(), 0.0);
    });
    return p;
}

std::size_t HeadParams::parameter_count() const {
    std::size_t n = 0;
    visit_param_buffers(const_cast<HeadParams&>(*this),
                        [&n](std::vector<double>& buf) { n += buf.size(); });
    return n;
}

bool HeadParams::all_finite() const {
    bool ok = true;
    visit_param_buffers(const_cast<HeadParams&>(*this), [&ok](std::vector<double>& buf) {
        for (double v : buf) {
            if (!std::isfinite(v)) {
                ok = false;
                return;
            }
        }
    });
    return ok;
}

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
           x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

struct LnCache {
    Matrix xhat;              // normalized rows before gamma/beta
    Matrix out;               // gamma * xhat + beta
    std::vector<double> inv;  // 1/sqrt(var + eps) per row
};

void ln_forward(const Matrix& x, const std::vector<double>& gamma,
                const std::vector<double>& beta, LnCache& cache) {
    const std::size_t d = x.cols;
    cache.xhat = Matrix(x.rows, d);
    cache.out = Matrix(x.rows, d);
    cache.inv.resize(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* row = x.row(r);
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        cache.inv[r] = inv;
        double* xh = cache.xhat.row(r);
        double* out = cache.out.row(r);
        for (std::size_t j = 0; j < d; ++j) {
            xh[j] = (row[j] - mean) * inv;
            out[j] = gamma[j] * xh[j] + beta[j];
        }
    }
}

// Returns dx; accumulates dgamma/dbeta.
Matrix ln_backward(const Matrix& dy, const LnCache& cache,
                   const std::vector<double>& gamma, std::vector<double>& dgamma,
                   std::vector<double>& dbeta) {
    const std::size_t d = dy.cols;
    Matrix dx(dy.rows, d);
    for (std::size_t r = 0; r < dy.rows; ++r) {
        const double* dyr = dy.row(r);
        const double* xh = cache.xhat.row(r);
        const double inv = cache.inv[r];
        double m1 = 0.0;
        double m2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double dxhat = dyr[j] * gamma[j];
            m1 += dxhat;
            m2 += dxhat * xh[j];
            dgamma[j] += dyr[j] * xh[j];
            dbeta[j] += dyr[j];
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        double* dxr = dx.row(r);
        for (std::size_t j = 0; j < d; ++j) {
            const double dxhat = dyr[j] * gamma[j];
            dxr[j] = inv * (dxhat - m1 - xh[j] * m2);
        }
    }
    return dx;
}

Matrix col_slice(const Matrix& m, std::size_t c0, std::size_t c1) {
    Matrix out(m.rows, c1 - c0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* src = m.row(r);
        std::copy(src + c0, src + c1, out.row(r));
    }
    return out;
}

void add_col_slice(Matrix& dst, const Matrix& src, std::size_t c0) {
    for (std::size_t r = 0; r < src.rows; ++r) {
        double* d = dst.row(r);
        const double* s = src.row(r);
        for (std::size_t j = 0; j < src.cols; ++j) d[c0 + j] += s[j];
    }
}

void softmax_rows_inplace(Matrix& m) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        double* row = m.row(r);
        double mx = row[0];
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < m.cols; ++j) row[j] *= inv;
    }
}

// row-wise: ds = (dp - (dp . p)) * p
Matrix softmax_rows_backward(const Matrix& dp, const Matrix& p) {
    Matrix ds(dp.rows, dp.cols);
    for (std::size_t r = 0; r < dp.rows; ++r) {
        const double* dpr = dp.row(r);
        const double* pr = p.row(r);
        double dot = 0.0;
        for (std::size_t j = 0; j < dp.cols; ++j) dot += dpr[j] * pr[j];
        double* dsr = ds.row(r);
        for (std::size_t j = 0; j < dp.cols; ++j) dsr[j] = (dpr[j] - dot) * pr[j];
    }
    return ds;
}

std::vector<double> col_sums(const Matrix& m) {
    std::vector<double> s(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.row(r);
        for (std::size_t j = 0; j < m.cols; ++j) s[j] += row[j];
    }
    return s;
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

struct BlockCache {
    Matrix x_in;
    LnCache ln1;
    Matrix q, k, v;
    std::vector<Matrix> attn;  // per-head T x T softmax rows
    Matrix attn_concat;
    Matrix x_mid;
    LnCache ln2;
    Matrix mlp_pre;
    Matrix mlp_act;
};

struct ForwardCache {
    Matrix x0;
    std::vector<BlockCache> blocks;
    Matrix x_final;
    LnCache lnf;
    std::size_t rows = 0;
    std::size_t query_base = 0;
};

void check_bundle(const TokenBundle& bundle, const HeadConfig& cfg) {
    if (bundle.context.cols != cfg.d_model || bundle.image.cols != cfg.d_model ||
        bundle.text.cols != cfg.d_model || bundle.state.cols != cfg.d_model) {
        throw InvalidArgument("paracat_forward: token width != d_model");
    }
    if (bundle.state.rows != 1) {
        throw InvalidArgument("paracat_forward: state must be a single token");
    }
    if (bundle.image.rows > cfg.max_image_tokens) {
        throw InvalidArgument("paracat_forward: too many image tokens");
    }
    if (bundle.text.rows > cfg.max_text_tokens) {
        throw InvalidArgument("paracat_forward: too many text tokens");
    }
}

Matrix assemble_tokens(const TokenBundle& bundle, const HeadParams& params,
                       const HeadConfig& cfg, std::size_t& query_base) {
    const std::size_t nq = cfg.query_count();
    const std::size_t rows =
        bundle.context.rows + bundle.image.rows + bundle.text.rows + 1 + nq;
    Matrix x(rows, cfg.d_model);
    std::size_t at = 0;
    const auto tag = [&](Modality m) {
        return params.modality_embed.row(static_cast<std::size_t>(m));
    };
    for (std::size_t i = 0; i < bundle.context.rows; ++i, ++at) {
        const double* src = bundle.context.row(i);
        const double* t = tag(Modality::Brain);
        double* dst = x.row(at);
        for (std::size_t j = 0; j < cfg.d_model; ++j) dst[j] = src[j] + t[j];
    }
    for (std::size_t i = 0; i < bundle.image.rows; ++i, ++at) {
        const double* src = bundle.image.row(i);
        const double* t = tag(Modality::Image);
        const double* pos = params.pos_image.row(i);
        double* dst = x.row(at);
        for (std::size_t j = 0; j < cfg.d_model; ++j) dst[j] = src[j] + t[j] + pos[j];
    }
    for (std::size_t i = 0; i < bundle.text.rows; ++i, ++at) {
        const double* src = bundle.text.row(i);
        const double* t = tag(Modality::Text);
        const double* pos = params.pos_text.row(i);
        double* dst = x.row(at);
        for (std::size_t j = 0; j < cfg.d_model; ++j) dst[j] = src[j] + t[j] + pos[j];
    }
    {
        const double* src = bundle.state.row(0);
        const double* t = tag(Modality::State);
        double* dst = x.row(at);
        for (std::size_t j = 0; j < cfg.d_model; ++j) dst[j] = src[j] + t[j];
        ++at;
    }
    query_base = at;
    for (std::size_t qidx = 0; qidx < nq; ++qidx, ++at) {
        const double* src = params.queries.row(qidx);
        const double* t = tag(Modality::Action);
        double* dst = x.row(at);
        for (std::size_t j = 0; j < cfg.d_model; ++j) dst[j] = src[j] + t[j];
    }
    return x;
}

ActionChunk run_forward(const TokenBundle& bundle, const HeadParams& params,
                        const HeadConfig& cfg, ForwardCache* cache,
                        ForwardStats* stats) {
    cfg.validate();
    check_bundle(bundle, cfg);
    const std::size_t d = cfg.d_model;
    const std::size_t n_heads = cfg.heads;
    const std::size_t dk = d / n_heads;
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dk));

    std::size_t query_base = 0;
    Matrix x = assemble_tokens(bundle, params, cfg, query_base);
    if (cache) {
        cache->x0 = x;
        cache->rows = x.rows;
        cache->query_base = query_base;
        cache->blocks.resize(params.blocks.size());
    }

    for (std::size_t l = 0; l < params.blocks.size(); ++l) {
        const BlockParams& b = params.blocks[l];
        BlockCache local;
        BlockCache& bc = cache ? cache->blocks[l] : local;
        bc.x_in = x;

        ln_forward(x, b.ln1_gamma, b.ln1_beta, bc.ln1);
        const Matrix& a = bc.ln1.out;
        bc.q = matmul(a, b.wq);
        add_row_bias(bc.q, b.bq);
        bc.k = matmul(a, b.wk);
        bc.v = matmul(a, b.wv);
        add_row_bias(bc.v, b.bv);

        bc.attn.resize(n_heads);
        bc.attn_concat = Matrix(x.rows, d);
        for (std::size_t h = 0; h < n_heads; ++h) {
            const Matrix qh = col_slice(bc.q, h * dk, (h + 1) * dk);
            const Matrix kh = col_slice(bc.k, h * dk, (h + 1) * dk);
            const Matrix vh = col_slice(bc.v, h * dk, (h + 1) * dk);
            Matrix scores = matmul_bt(qh, kh);
            for (double& s : scores.data) s *= attn_scale;
            softmax_rows_inplace(scores);
            const Matrix oh = matmul(scores, vh);
            bc.attn[h] = std::move(scores);
            add_col_slice(bc.attn_concat, oh, h * dk);
        }
        Matrix attn_out = matmul(bc.attn_concat, b.wo);
        add_row_bias(attn_out, b.bo);

        bc.x_mid = x;
        for (std::size_t i = 0; i < x.data.size(); ++i) bc.x_mid.data[i] += attn_out.data[i];

        ln_forward(bc.x_mid, b.ln2_gamma, b.ln2_beta, bc.ln2);
        bc.mlp_pre = matmul(bc.ln2.out, b.mlp_w1);
        add_row_bias(bc.mlp_pre, b.mlp_b1);
        bc.mlp_act = Matrix(bc.mlp_pre.rows, bc.mlp_pre.cols);
        for (std::size_t i = 0; i < bc.mlp_pre.data.size(); ++i) {
            bc.mlp_act.data[i] = gelu(bc.mlp_pre.data[i]);
        }
        Matrix mlp_out = matmul(bc.mlp_act, b.mlp_w2);
        add_row_bias(mlp_out, b.mlp_b2);

        x = bc.x_mid;
        for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += mlp_out.data[i];
        if (stats) ++stats->block_evals;
    }

    LnCache lnf_local;
    LnCache& lnf = cache ? cache->lnf : lnf_local;
    if (cache) cache->x_final = x;
    ln_forward(x, params.lnf_gamma, params.lnf_beta, lnf);

    const std::size_t nq = cfg.query_count();
    ActionChunk chunk;
    chunk.chunk_steps = cfg.chunk_steps;
    chunk.action_dims = cfg.action_dims;
    chunk.logits = Matrix(nq, 3);
    chunk.probs.resize(nq);
    for (std::size_t qidx = 0; qidx < nq; ++qidx) {
        const double* z = lnf.out.row(query_base + qidx);
        double* o = chunk.logits.row(qidx);
        for (std::size_t c = 0; c < 3; ++c) {
            double acc = params.b_out[c];
            for (std::size_t j = 0; j < d; ++j) acc += z[j] * params.w_out(j, c);
            o[c] = acc;
        }
        chunk.probs[qidx] = softmax_temp3({o[0], o[1], o[2]}, 1.0);
    }
    return chunk;
}

void check_labels(const std::vector<std::vector<Ternary>>& labels,
                  std::size_t chunk_steps, std::size_t action_dims) {
    if (labels.size() != chunk_steps) {
        throw InvalidArgument("paracat_loss: label grid has wrong K");
    }
    for (const auto& row : labels) {
        if (row.size() != action_dims) {
            throw InvalidArgument("paracat_loss: label grid has wrong D");
        }
        for (Ternary y : row) {
            if (y < -1 || y > 1) {
                throw InvalidArgument("paracat_loss: label outside {-1,0,+1}");
            }
        }
    }
}

// dlogits has shape (K*D) x 3. Returns the breakdown; fills per-cell logit
// gradients when dlogits != nullptr.
LossBreakdown loss_impl(const ActionChunk& chunk,
                        const std::vector<std::vector<Ternary>>& labels,
                        const LossWeights& lw, Matrix* dlogits) {
    const std::size_t K = chunk.chunk_steps;
    const std::size_t D = chunk.action_dims;
    check_labels(labels, K, D);
    lw.validate(D);
    const double eps = lw.label_smoothing;

    LossBreakdown out;
    if (dlogits) *dlogits = Matrix(K * D, 3);

    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t j = 0; j < D; ++j) {
            const std::size_t cell = k * D + j;
            const ProbVector3& pv = chunk.probs[cell];
            const double p[3] = {pv.p_minus, pv.p_zero, pv.p_plus};
            const std::size_t cls = static_cast<std::size_t>(labels[k][j] + 1);
            const double w = lw.dim_weight(j) * lw.class_weights[cls];

            double target[3];
            for (std::size_t c = 0; c < 3; ++c) {
                target[c] = eps / 3.0 + (c == cls ? 1.0 - eps : 0.0);
            }

            // 0 * ln(0) terms are 0 by convention; saturated softmax outputs
            // can genuinely underflow to exact zero.
            double ce_cell = 0.0;
            double h_cell = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                if (target[c] > 0.0) ce_cell -= target[c] * std::log(p[c]);
                if (p[c] > 0.0) h_cell -= p[c] * std::log(p[c]);
            }
            out.ce += w * ce_cell;
            out.entropy += h_cell;

            double kl_cell = 0.0;
            const ProbVector3* q = nullptr;
            if (k >= 1) {
                q = &chunk.probs[(k - 1) * D + j];
                const double qv[3] = {q->p_minus, q->p_zero, q->p_plus};
                for (std::size_t c = 0; c < 3; ++c) {
                    if (p[c] > 0.0) kl_cell += p[c] * std::log(p[c] / std::max(qv[c], 1e-12));
                }
                out.temporal += kl_cell;
            }

            if (dlogits) {
                double* g = dlogits->row(cell);
                for (std::size_t c = 0; c < 3; ++c) {
                    // smoothed CE through softmax
                    double gc = w * (p[c] - target[c]);
                    // entropy penalty: dH/do_c = -p_c (ln p_c + H)
                    if (p[c] > 0.0) {
                        gc += lw.lambda_entropy * (-p[c] * (std::log(p[c]) + h_cell));
                        // temporal KL, own term only (target is stop-gradient)
                        if (q) {
                            const double qc = std::max((*q)[c], 1e-12);
                            gc += lw.lambda_temporal * p[c] *
                                  (std::log(p[c] / qc) - kl_cell);
                        }
                    }
                    g[c] += gc;
                }
            }
        }
    }
    out.total = out.ce + lw.lambda_entropy * out.entropy + lw.lambda_temporal * out.temporal;
    return out;
}

}  // namespace

ActionChunk paracat_forward(const TokenBundle& bundle, const HeadParams& params,
                            const HeadConfig& cfg, ForwardStats* stats) {
    return run_forward(bundle, params, cfg, nullptr, stats);
}

LossBreakdown paracat_loss(const ActionChunk& chunk,
                           const std::vector<std::vector<Ternary>>& labels,
                           const LossWeights& lw) {
    return loss_impl(chunk, labels, lw, nullptr);
}

LossBreakdown paracat_loss_grad(const TokenBundle& bundle,
                                const std::vector<std::vector<Ternary>>& labels,
                                const LossWeights& lw, const HeadParams& params,
                                const HeadConfig& cfg, HeadParams& grads) {
    ForwardCache cache;
    const ActionChunk chunk = run_forward(bundle, params, cfg, &cache, nullptr);

    Matrix dlogits;
    const LossBreakdown breakdown = loss_impl(chunk, labels, lw, &dlogits);

    const std::size_t d = cfg.d_model;
    const std::size_t nq = cfg.query_count();
    const std::size_t n_heads = cfg.heads;
    const std::size_t dk = d / n_heads;
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dk));

    // readout: z -> logits
    Matrix dz(cache.rows, d);
    for (std::size_t qidx = 0; qidx < nq; ++qidx) {
        const double* go = dlogits.row(qidx);
        const double* z = cache.lnf.out.row(cache.query_base + qidx);
        double* dzr = dz.row(cache.query_base + qidx);
        for (std::size_t c = 0; c < 3; ++c) {
            grads.b_out[c] += go[c];
            for (std::size_t j = 0; j < d; ++j) {
                grads.w_out(j, c) += z[j] * go[c];
                dzr[j] += go[c] * params.w_out(j, c);
            }
        }
    }

    Matrix dx = ln_backward(dz, cache.lnf, params.lnf_gamma, grads.lnf_gamma,
                            grads.lnf_beta);

    for (std::size_t l = params.blocks.size(); l-- > 0;) {
        const BlockParams& b = params.blocks[l];
        const BlockCache& bc = cache.blocks[l];
        BlockParams& gb = grads.blocks[l];

        // MLP branch: x_out = x_mid + gelu(LN2(x_mid) W1 + b1) W2 + b2
        const Matrix& d_mlp_out = dx;
        Matrix d_act = matmul_bt(d_mlp_out, b.mlp_w2);
        matmul_at_acc(bc.mlp_act, d_mlp_out, gb.mlp_w2);
        add_into(gb.mlp_b2, col_sums(d_mlp_out));
        for (std::size_t i = 0; i < d_act.data.size(); ++i) {
            d_act.data[i] *= gelu_grad(bc.mlp_pre.data[i]);
        }
        Matrix d_ln2_out = matmul_bt(d_act, b.mlp_w1);
        matmul_at_acc(bc.ln2.out, d_act, gb.mlp_w1);
        add_into(gb.mlp_b1, col_sums(d_act));

        Matrix dx_mid = ln_backward(d_ln2_out, bc.ln2, b.ln2_gamma, gb.ln2_gamma,
                                    gb.ln2_beta);
        for (std::size_t i = 0; i < dx_mid.data.size(); ++i) dx_mid.data[i] += dx.data[i];

        // attention branch: x_mid = x_in + concat_h(P_h V_h) Wo + bo
        const Matrix& d_attn_out = dx_mid;
        Matrix d_concat = matmul_bt(d_attn_out, b.wo);
        matmul_at_acc(bc.attn_concat, d_attn_out, gb.wo);
        add_into(gb.bo, col_sums(d_attn_out));

        Matrix dq(bc.q.rows, d), dkm(bc.k.rows, d), dv(bc.v.rows, d);
        for (std::size_t h = 0; h < n_heads; ++h) {
            const Matrix qh = col_slice(bc.q, h * dk, (h + 1) * dk);
            const Matrix kh = col_slice(bc.k, h * dk, (h + 1) * dk);
            const Matrix vh = col_slice(bc.v, h * dk, (h + 1) * dk);
            const Matrix d_oh = col_slice(d_concat, h * dk, (h + 1) * dk);
            const Matrix& p = bc.attn[h];

            Matrix dp = matmul_bt(d_oh, vh);
            Matrix dvh = matmul_at(p, d_oh);
            Matrix ds = softmax_rows_backward(dp, p);
            for (double& v : ds.data) v *= attn_scale;
            Matrix dqh = matmul(ds, kh);
            Matrix dkh = matmul_at(ds, qh);

            add_col_slice(dq, dqh, h * dk);
            add_col_slice(dkm, dkh, h * dk);
            add_col_slice(dv, dvh, h * dk);
        }

        const Matrix& a = bc.ln1.out;
        Matrix da = matmul_bt(dq, b.wq);
        matmul_at_acc(a, dq, gb.wq);
        add_into(gb.bq, col_sums(dq));
        matmul_bt_acc(dkm, b.wk, da);
        matmul_at_acc(a, dkm, gb.wk);
        matmul_bt_acc(dv, b.wv, da);
        matmul_at_acc(a, dv, gb.wv);
        add_into(gb.bv, col_sums(dv));

        Matrix dx_in = ln_backward(da, bc.ln1, b.ln1_gamma, gb.ln1_gamma, gb.ln1_beta);
        for (std::size_t i = 0; i < dx_in.data.size(); ++i) dx_in.data[i] += dx_mid.data[i];
        dx = std::move(dx_in);
    }

    // token assembly: route row gradients into the embedding tables
    std::size_t at = 0;
    const auto add_rows = [&](Matrix& table, std::size_t table_row, std::size_t x_row) {
        double* t = table.row(table_row);
        const double* g = dx.row(x_row);
        for (std::size_t j = 0; j < d; ++j) t[j] += g[j];
    };
    const TokenBundle& bundle_ref = bundle;
    for (std::size_t i = 0; i < bundle_ref.context.rows; ++i, ++at) {
        add_rows(grads.modality_embed, static_cast<std::size_t>(Modality::Brain), at);
    }
    for (std::size_t i = 0; i < bundle_ref.image.rows; ++i, ++at) {
        add_rows(grads.modality_embed, static_cast<std::size_t>(Modality::Image), at);
        add_rows(grads.pos_image, i, at);
    }
    for (std::size_t i = 0; i < bundle_ref.text.rows; ++i, ++at) {
        add_rows(grads.modality_embed, static_cast<std::size_t>(Modality::Text), at);
        add_rows(grads.pos_text, i, at);
    }
    add_rows(grads.modality_embed, static_cast<std::size_t>(Modality::State), at);
    ++at;
    for (std::size_t qidx = 0; qidx < nq; ++qidx, ++at) {
        add_rows(grads.modality_embed, static_cast<std::size_t>(Modality::Action), at);
        add_rows(grads.queries, qidx, at);
    }

    return breakdown;
}

double grad_check(const HeadParams& params, const HeadConfig& cfg,
                  const TokenBundle& bundle,
                  const std::vector<std::vector<Ternary>>& labels,
                  const LossWeights& lw, double h, std::size_t sample_coords,
                  std::uint64_t seed) {
    if (h < 1e-6 || h > 1e-4) {
        throw InvalidArgument("grad_check: h must be in [1e-6, 1e-4]");
    }
    HeadParams grads = HeadParams::zeros_like(params);
    paracat_loss_grad(bundle, labels, lw, params, cfg, grads);
    if (!grads.all_finite()) {
        throw NumericalFailure("grad_check: non-finite analytic gradient");
    }

    HeadParams work = params;
    std::vector<std::vector<double>*> bufs;
    visit_param_buffers(work, [&bufs](std::vector<double>& b) { bufs.push_back(&b); });
    std::vector<std::vector<double>*> gbufs;
    visit_param_buffers(grads, [&gbufs](std::vector<double>& b) { gbufs.push_back(&b); });

    std::size_t total = 0;
    for (const auto* b : bufs) total += b->size();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);

    const auto loss_at = [&]() {
        const ActionChunk chunk = run_forward(bundle, work, cfg, nullptr, nullptr);
        return loss_impl(chunk, labels, lw, nullptr).total;
    };

    double max_rel = 0.0;
    for (std::size_t s = 0; s < sample_coords; ++s) {
        std::size_t flat = pick(rng);
        std::size_t bi = 0;
        while (flat >= bufs[bi]->size()) {
            flat -= bufs[bi]->size();
            ++bi;
        }
        double& slot = (*bufs[bi])[flat];
        const double orig = slot;
        slot = orig + h;
        const double lp = loss_at();
        slot = orig - h;
        const double lm = loss_at();
        slot = orig;

        const double g_num = (lp - lm) / (2.0 * h);
        const double g_ana = (*gbufs[bi])[flat];
        if (!std::isfinite(g_num) || !std::isfinite(g_ana)) {
            throw NumericalFailure("grad_check: non-finite gradient sample");
        }
        const double denom = std::max({std::abs(g_ana), std::abs(g_num), 1e-8});
        max_rel = std::max(max_rel, std::abs(g_num - g_ana) / denom);
    }
    return max_rel;
}

}  // namespace saivla
