#include "saivla/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "saivla/cache.hpp"
#include "saivla/errors.hpp"

namespace saivla {

AdamW::AdamW(const HeadParams& shape, AdamWConfig cfg)
    : cfg_(cfg), m_(HeadParams::zeros_like(shape)), v_(HeadParams::zeros_like(shape)) {}

void AdamW::step(HeadParams& params, const HeadParams& grads) {
    ++t_;
    std::vector<std::vector<double>*> p_bufs, m_bufs, v_bufs;
    std::vector<const std::vector<double>*> g_bufs;
    visit_param_buffers(params, [&](std::vector<double>& b) { p_bufs.push_back(&b); });
    visit_param_buffers(const_cast<HeadParams&>(grads),
                        [&](std::vector<double>& b) { g_bufs.push_back(&b); });
    visit_param_buffers(m_, [&](std::vector<double>& b) { m_bufs.push_back(&b); });
    visit_param_buffers(v_, [&](std::vector<double>& b) { v_bufs.push_back(&b); });

    double scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
        double norm2 = 0.0;
        for (const auto* g : g_bufs) {
            for (double v : *g) norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
    }

    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t b = 0; b < p_bufs.size(); ++b) {
        std::vector<double>& p = *p_bufs[b];
        const std::vector<double>& g = *g_bufs[b];
        std::vector<double>& m = *m_bufs[b];
        std::vector<double>& v = *v_bufs[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i] * scale;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                               cfg_.weight_decay * p[i]);
        }
    }
}

namespace {

struct ToySample {
    TokenBundle bundle;
    std::vector<std::vector<Ternary>> labels;
};

ToySample draw_sample(std::mt19937_64& rng, const HeadConfig& cfg,
                      const ToyTaskSpec& task) {
    const std::size_t cells = cfg.query_count();
    if (cells > cfg.d_model) {
        throw InvalidArgument("train_toy: K*D must fit in the state token width");
    }
    std::uniform_int_distribution<int> label_dist(-1, 1);

    ToySample s;
    s.bundle.context = Matrix(task.context_tokens, cfg.d_model);
    s.bundle.image = Matrix(task.image_tokens, cfg.d_model);
    s.bundle.text = Matrix(task.text_tokens, cfg.d_model);
    s.bundle.state = Matrix(1, cfg.d_model);
    s.labels.assign(cfg.chunk_steps, std::vector<Ternary>(cfg.action_dims));
    for (std::size_t k = 0; k < cfg.chunk_steps; ++k) {
        for (std::size_t j = 0; j < cfg.action_dims; ++j) {
            const Ternary y = static_cast<Ternary>(label_dist(rng));
            s.labels[k][j] = y;
            s.bundle.state(0, k * cfg.action_dims + j) = static_cast<double>(y);
        }
    }
    return s;
}

void scale_params(HeadParams& p, double s) {
    visit_param_buffers(p, [s](std::vector<double>& buf) {
        for (double& v : buf) v *= s;
    });
}

}  // namespace

std::vector<double> eval_toy(const HeadParams& params, const HeadConfig& cfg,
                             const ToyTaskSpec& task, std::uint64_t eval_seed) {
    std::mt19937_64 rng(eval_seed);
    std::vector<double> correct(cfg.action_dims, 0.0);
    for (std::size_t n = 0; n < task.eval_samples; ++n) {
        const ToySample s = draw_sample(rng, cfg, task);
        const ActionChunk chunk = paracat_forward(s.bundle, params, cfg);
        for (std::size_t k = 0; k < cfg.chunk_steps; ++k) {
            for (std::size_t j = 0; j < cfg.action_dims; ++j) {
                const double* o = chunk.logits.row(k * cfg.action_dims + j);
                const std::size_t pred =
                    o[0] >= o[1] ? (o[0] >= o[2] ? 0 : 2) : (o[1] >= o[2] ? 1 : 2);
                const std::size_t truth = static_cast<std::size_t>(s.labels[k][j] + 1);
                if (pred == truth) correct[j] += 1.0;
            }
        }
    }
    const double denom =
        static_cast<double>(task.eval_samples) * static_cast<double>(cfg.chunk_steps);
    for (double& c : correct) c /= denom;
    return correct;
}

ToyTrainResult train_toy(const ToyTaskSpec& task, const HeadConfig& cfg) {
    cfg.validate();
    task.loss.validate(cfg.action_dims);
    if (task.batch < 1 || task.eval_samples < 1) {
        throw InvalidArgument("train_toy: batch and eval_samples must be >= 1");
    }

    HeadParams params = HeadParams::random(cfg, task.seed);
    AdamW opt(params, task.optimizer);
    std::mt19937_64 rng(task.seed + 1);

    double last_loss = 0.0;
    for (std::size_t step = 0; step < task.steps; ++step) {
        HeadParams grads = HeadParams::zeros_like(params);
        double batch_loss = 0.0;
        for (std::size_t b = 0; b < task.batch; ++b) {
            const ToySample s = draw_sample(rng, cfg, task);
            batch_loss +=
                paracat_loss_grad(s.bundle, s.labels, task.loss, params, cfg, grads)
                    .total;
        }
        const double inv_batch = 1.0 / static_cast<double>(task.batch);
        batch_loss *= inv_batch;
        scale_params(grads, inv_batch);
        if (!std::isfinite(batch_loss)) {
            throw NumericalFailure("train_toy: loss diverged at step " +
                                   std::to_string(step));
        }
        opt.step(params, grads);
        last_loss = batch_loss;
    }

    ToyTrainResult result;
    result.dim_accuracy = eval_toy(params, cfg, task, task.seed + 0x9E3779B9u);
    result.mean_accuracy = 0.0;
    result.min_dim_accuracy = 1.0;
    for (double a : result.dim_accuracy) {
        result.mean_accuracy += a;
        result.min_dim_accuracy = std::min(result.min_dim_accuracy, a);
    }
    result.mean_accuracy /= static_cast<double>(result.dim_accuracy.size());
    result.final_loss = last_loss;
    result.steps_run = task.steps;
    result.params = std::move(params);
    return result;
}

namespace {

// Stable names for the parameter buffers, matching the visitation order.
std::vector<std::string> param_buffer_names(const HeadParams& p) {
    std::vector<std::string> names = {"queries", "modality_embed", "pos_image",
                                      "pos_text"};
    for (std::size_t l = 0; l < p.blocks.size(); ++l) {
        const std::string b = "block" + std::to_string(l) + ".";
        for (const char* field :
             {"ln1_gamma", "ln1_beta", "ln2_gamma", "ln2_beta", "wq", "bq", "wk",
              "wv", "bv", "wo", "bo", "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"}) {
            names.push_back(b + field);
        }
    }
    names.push_back("lnf_gamma");
    names.push_back("lnf_beta");
    names.push_back("w_out");
    names.push_back("b_out");
    return names;
}

}  // namespace

void save_head_params(const HeadParams& params, const HeadConfig& cfg,
                      const std::string& path, std::int64_t timestamp_utc) {
    const std::vector<std::string> names = param_buffer_names(params);
    std::vector<NamedTensor> tensors;
    std::size_t idx = 0;
    visit_param_buffers(const_cast<HeadParams&>(params),
                        [&](std::vector<double>& buf) {
                            NamedTensor t;
                            t.name = names[idx++];
                            t.dtype = Dtype::F64;
                            t.values = Matrix(1, buf.size());
                            t.values.data = buf;
                            tensors.push_back(std::move(t));
                        });
    CacheManifest manifest;
    manifest.version_hash = "head-params-v1";
    manifest.dataset_id = "synthetic";
    manifest.task_id = "toy-copy";
    manifest.big_brain_id = "none";
    manifest.tokenizer_id = "none";
    manifest.prompt_id = "none";
    manifest.prompt_hash = "";
    manifest.n_context = 0;
    manifest.d_model = cfg.d_model;
    manifest.k_chunk = cfg.chunk_steps;
    manifest.timestamp_utc = timestamp_utc;
    write_archive(manifest, tensors, path);
}

HeadParams load_head_params(const std::string& path, const HeadConfig& cfg) {
    ArchiveReader reader = ArchiveReader::open(path);
    HeadParams params = HeadParams::random(cfg, 0);
    const std::vector<std::string> names = param_buffer_names(params);
    std::size_t idx = 0;
    visit_param_buffers(params, [&](std::vector<double>& buf) {
        const TensorData t = reader.tensor(names[idx++]);
        const Matrix m = t.to_matrix();
        if (m.data.size() != buf.size()) {
            throw InvalidArgument("load_head_params: tensor size mismatch for '" +
                                  t.entry.name + "'");
        }
        buf = m.data;
    });
    return params;
}

}  // namespace saivla
