#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include <doctest.h>

#include "paracat_oracle.hpp"
#include "saivla/errors.hpp"
#include "saivla/paracat.hpp"
#include "saivla/train.hpp"

using namespace saivla;

namespace {

Matrix random_mat(std::mt19937_64& rng, std::size_t r, std::size_t c, double s = 0.5) {
    std::uniform_real_distribution<double> dist(-s, s);
    Matrix m(r, c);
    for (double& v : m.data) v = dist(rng);
    return m;
}

TokenBundle random_bundle(std::mt19937_64& rng, std::size_t nc, std::size_t tv,
                          std::size_t tw, std::size_t d) {
    TokenBundle b;
    b.context = random_mat(rng, nc, d);
    b.image = random_mat(rng, tv, d);
    b.text = random_mat(rng, tw, d);
    b.state = random_mat(rng, 1, d);
    return b;
}

void zero_params(HeadParams& p) {
    visit_param_buffers(p, [](std::vector<double>& b) {
        std::fill(b.begin(), b.end(), 0.0);
    });
}

std::vector<std::vector<Ternary>> random_labels(std::mt19937_64& rng, std::size_t k,
                                                std::size_t d) {
    std::uniform_int_distribution<int> coin(-1, 1);
    std::vector<std::vector<Ternary>> labels(k, std::vector<Ternary>(d));
    for (auto& row : labels)
        for (auto& v : row) v = static_cast<Ternary>(coin(rng));
    return labels;
}

}  // namespace

TEST_CASE("forward shape contract") {
    HeadConfig cfg;
    cfg.depth = 2;
    cfg.d_model = 32;
    cfg.heads = 4;
    cfg.chunk_steps = 5;
    cfg.action_dims = 3;
    cfg.max_image_tokens = 16;
    cfg.max_text_tokens = 4;
    const HeadParams params = HeadParams::random(cfg, 1);
    std::mt19937_64 rng(2);
    const TokenBundle bundle = random_bundle(rng, 8, 16, 4, 32);

    ForwardStats stats;
    const ActionChunk chunk = paracat_forward(bundle, params, cfg, &stats);
    CHECK(chunk.logits.rows == 15);  // K*D
    CHECK(chunk.logits.cols == 3);
    CHECK(chunk.probs.size() == 15);
    CHECK(stats.block_evals == 2);
    for (const ProbVector3& p : chunk.probs) CHECK(p.normalized(1e-6));

    TokenBundle bad = bundle;
    bad.text = Matrix(4, 16);
    CHECK_THROWS_AS(paracat_forward(bad, params, cfg), InvalidArgument);
}

TEST_CASE("all K*D logits come from a single pass regardless of K") {
    for (std::size_t k : {1, 5, 20}) {
        HeadConfig cfg;
        cfg.depth = 3;
        cfg.d_model = 16;
        cfg.heads = 2;
        cfg.chunk_steps = k;
        cfg.action_dims = 4;
        cfg.max_image_tokens = 4;
        cfg.max_text_tokens = 4;
        const HeadParams params = HeadParams::random(cfg, 3);
        std::mt19937_64 rng(4);
        const TokenBundle bundle = random_bundle(rng, 2, 4, 2, 16);
        ForwardStats stats;
        const ActionChunk chunk = paracat_forward(bundle, params, cfg, &stats);
        CHECK(stats.block_evals == 3);  // == depth, independent of K
        CHECK(chunk.logits.rows == k * 4);
    }
}

TEST_CASE("constant head: zero weights plus bias give fixed probabilities") {
    HeadConfig cfg;
    cfg.depth = 2;
    cfg.d_model = 16;
    cfg.heads = 2;
    cfg.chunk_steps = 3;
    cfg.action_dims = 2;
    cfg.max_image_tokens = 4;
    cfg.max_text_tokens = 4;
    HeadParams params = HeadParams::random(cfg, 5);
    zero_params(params);
    params.b_out = {0.0, 0.0, std::log(2.0)};

    std::mt19937_64 rng(6);
    const TokenBundle bundle = random_bundle(rng, 2, 4, 2, 16);
    const ActionChunk chunk = paracat_forward(bundle, params, cfg);
    for (const ProbVector3& p : chunk.probs) {
        CHECK(p.p_minus == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(p.p_zero == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(p.p_plus == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("depth-1 single-head forward matches the hand-rolled oracle") {
    HeadConfig cfg;
    cfg.depth = 1;
    cfg.d_model = 8;
    cfg.heads = 1;
    cfg.chunk_steps = 2;
    cfg.action_dims = 2;
    cfg.max_image_tokens = 3;
    cfg.max_text_tokens = 2;
    const HeadParams params = HeadParams::random(cfg, 7, 0.3);
    std::mt19937_64 rng(8);
    const TokenBundle bundle = random_bundle(rng, 2, 3, 2, 8);

    const ActionChunk chunk = paracat_forward(bundle, params, cfg);
    const auto want = paracat_oracle::forward_logits(bundle, params, cfg);
    for (std::size_t q = 0; q < 4; ++q) {
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(chunk.logits(q, c) == doctest::Approx(want[q][c]).epsilon(1e-9));
        }
    }
}

TEST_CASE("loss: perfect one-hot probabilities cost nothing") {
    ActionChunk chunk;
    chunk.chunk_steps = 2;
    chunk.action_dims = 2;
    chunk.logits = Matrix(4, 3);
    chunk.probs.resize(4);
    const std::vector<std::vector<Ternary>> labels{{-1, 0}, {1, 1}};
    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t j = 0; j < 2; ++j) {
            ProbVector3 p{0.0, 0.0, 0.0};
            const int cls = labels[k][j] + 1;
            (cls == 0 ? p.p_minus : cls == 1 ? p.p_zero : p.p_plus) = 1.0;
            chunk.probs[k * 2 + j] = p;
        }
    }
    LossWeights lw;
    const LossBreakdown out = paracat_loss(chunk, labels, lw);
    CHECK(out.total == doctest::Approx(0.0));
    CHECK(out.ce == doctest::Approx(0.0));
    CHECK(out.entropy == doctest::Approx(0.0));
}

TEST_CASE("loss: uniform probabilities cost K*D*ln3") {
    HeadConfig cfg;
    cfg.depth = 1;
    cfg.d_model = 8;
    cfg.heads = 1;
    cfg.chunk_steps = 4;
    cfg.action_dims = 3;
    cfg.max_image_tokens = 2;
    cfg.max_text_tokens = 2;
    HeadParams params = HeadParams::random(cfg, 9);
    zero_params(params);  // uniform logits everywhere
    std::mt19937_64 rng(10);
    const TokenBundle bundle = random_bundle(rng, 1, 2, 1, 8);
    const ActionChunk chunk = paracat_forward(bundle, params, cfg);

    LossWeights lw;
    const LossBreakdown out = paracat_loss(chunk, random_labels(rng, 4, 3), lw);
    CHECK(out.ce == doctest::Approx(12.0 * std::log(3.0)).epsilon(1e-9));
    CHECK(out.temporal == doctest::Approx(0.0));
    CHECK(out.entropy == doctest::Approx(12.0 * std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("loss: smoothed cross-entropy matches the scalar expansion") {
    ActionChunk chunk;
    chunk.chunk_steps = 1;
    chunk.action_dims = 1;
    chunk.logits = Matrix(1, 3);
    chunk.probs = {ProbVector3{0.2, 0.3, 0.5}};
    LossWeights lw;
    lw.label_smoothing = 0.05;
    const LossBreakdown out =
        paracat_loss(chunk, {{Ternary{1}}}, lw);  // true class +1
    const double eps3 = 0.05 / 3.0;
    const double want = -(eps3 * std::log(0.2) + eps3 * std::log(0.3) +
                          (0.95 + eps3) * std::log(0.5));
    CHECK(out.ce == doctest::Approx(want).epsilon(1e-12));
    CHECK(out.total == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("loss: temporal KL sums k>=2 against stop-gradient targets") {
    ActionChunk chunk;
    chunk.chunk_steps = 3;
    chunk.action_dims = 1;
    chunk.logits = Matrix(3, 3);
    chunk.probs = {ProbVector3{0.2, 0.3, 0.5}, ProbVector3{0.2, 0.3, 0.5},
                   ProbVector3{0.6, 0.3, 0.1}};
    LossWeights lw;
    lw.lambda_temporal = 2.0;
    const LossBreakdown out =
        paracat_loss(chunk, {{Ternary{0}}, {Ternary{0}}, {Ternary{0}}}, lw);
    // first pair identical -> 0; second pair is a real divergence
    const double kl = 0.6 * std::log(0.6 / 0.2) + 0.3 * std::log(0.3 / 0.3) +
                      0.1 * std::log(0.1 / 0.5);
    CHECK(out.temporal == doctest::Approx(kl).epsilon(1e-12));
    CHECK(out.total == doctest::Approx(out.ce + 2.0 * kl).epsilon(1e-12));
}

TEST_CASE("loss rejects bad labels and weights") {
    ActionChunk chunk;
    chunk.chunk_steps = 1;
    chunk.action_dims = 1;
    chunk.logits = Matrix(1, 3);
    chunk.probs = {ProbVector3{0.2, 0.3, 0.5}};
    LossWeights lw;
    CHECK_THROWS_AS(paracat_loss(chunk, {{Ternary{2}}}, lw), InvalidArgument);
    CHECK_THROWS_AS(paracat_loss(chunk, {{Ternary{0}, Ternary{0}}}, lw), InvalidArgument);
    lw.label_smoothing = 0.7;
    CHECK_THROWS_AS(paracat_loss(chunk, {{Ternary{0}}}, lw), InvalidArgument);
    LossWeights lw2;
    lw2.dim_weights = {0.0};
    CHECK_THROWS_AS(paracat_loss(chunk, {{Ternary{0}}}, lw2), InvalidArgument);
}

TEST_CASE("entropy gradient vanishes at the uniform stationary point") {
    HeadConfig cfg;
    cfg.depth = 1;
    cfg.d_model = 8;
    cfg.heads = 1;
    cfg.chunk_steps = 2;
    cfg.action_dims = 2;
    cfg.max_image_tokens = 2;
    cfg.max_text_tokens = 2;
    HeadParams params = HeadParams::random(cfg, 11);
    zero_params(params);
    std::mt19937_64 rng(12);
    TokenBundle bundle = random_bundle(rng, 1, 2, 1, 8);

    // CE of a uniform head also has zero gradient only when targets are
    // uniform, so isolate the entropy term by differencing lambda values.
    LossWeights base;
    HeadParams g0 = HeadParams::zeros_like(params);
    paracat_loss_grad(bundle, {{1, 1}, {0, -1}}, base, params, cfg, g0);

    LossWeights with_h = base;
    with_h.lambda_entropy = 0.7;
    HeadParams g1 = HeadParams::zeros_like(params);
    paracat_loss_grad(bundle, {{1, 1}, {0, -1}}, with_h, params, cfg, g1);

    // at uniform probabilities the entropy term contributes nothing
    std::vector<std::vector<double>*> b0, b1;
    visit_param_buffers(g0, [&](std::vector<double>& b) { b0.push_back(&b); });
    visit_param_buffers(g1, [&](std::vector<double>& b) { b1.push_back(&b); });
    for (std::size_t i = 0; i < b0.size(); ++i) {
        for (std::size_t j = 0; j < b0[i]->size(); ++j) {
            CHECK((*b1[i])[j] == doctest::Approx((*b0[i])[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("entropy-term gradient scales linearly in lambda") {
    HeadConfig cfg;
    cfg.depth = 1;
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.chunk_steps = 2;
    cfg.action_dims = 2;
    cfg.max_image_tokens = 2;
    cfg.max_text_tokens = 2;
    const HeadParams params = HeadParams::random(cfg, 13, 0.4);
    std::mt19937_64 rng(14);
    const TokenBundle bundle = random_bundle(rng, 1, 2, 1, 8);
    const auto labels = random_labels(rng, 2, 2);

    const auto grad_with = [&](double lambda) {
        LossWeights lw;
        lw.lambda_entropy = lambda;
        HeadParams g = HeadParams::zeros_like(params);
        paracat_loss_grad(bundle, labels, lw, params, cfg, g);
        return g;
    };
    const HeadParams g0 = grad_with(0.0);
    const HeadParams g1 = grad_with(0.3);
    const HeadParams g2 = grad_with(0.6);

    std::vector<std::vector<double>*> b0, b1, b2;
    visit_param_buffers(const_cast<HeadParams&>(g0),
                        [&](std::vector<double>& b) { b0.push_back(&b); });
    visit_param_buffers(const_cast<HeadParams&>(g1),
                        [&](std::vector<double>& b) { b1.push_back(&b); });
    visit_param_buffers(const_cast<HeadParams&>(g2),
                        [&](std::vector<double>& b) { b2.push_back(&b); });
    for (std::size_t i = 0; i < b0.size(); ++i) {
        for (std::size_t j = 0; j < b0[i]->size(); ++j) {
            const double d1 = (*b1[i])[j] - (*b0[i])[j];
            const double d2 = (*b2[i])[j] - (*b0[i])[j];
            CHECK(d2 == doctest::Approx(2.0 * d1).epsilon(1e-9));
        }
    }
}

TEST_CASE("gradient check on the tiny config beats 1e-4") {
    HeadConfig cfg;
    cfg.depth = 1;
    cfg.d_model = 8;
    cfg.heads = 1;
    cfg.chunk_steps = 2;
    cfg.action_dims = 2;
    cfg.max_image_tokens = 2;
    cfg.max_text_tokens = 2;
    const HeadParams params = HeadParams::random(cfg, 15, 0.3);
    std::mt19937_64 rng(16);
    const TokenBundle bundle = random_bundle(rng, 1, 2, 1, 8);
    const auto labels = random_labels(rng, 2, 2);

    LossWeights lw;
    lw.label_smoothing = 0.05;
    lw.lambda_entropy = 3e-3;
    lw.lambda_temporal = 3e-3;
    lw.dim_weights = {1.0, 1.4};

    const double err = grad_check(params, cfg, bundle, labels, lw, 1e-5, 250, 17);
    CHECK(err < 1e-4);

    CHECK_THROWS_AS(grad_check(params, cfg, bundle, labels, lw, 1e-3, 10, 0),
                    InvalidArgument);
}

TEST_CASE("loss is permutation-equivariant over dimensions with uniform weights") {
    HeadConfig cfg;
    cfg.depth = 2;
    cfg.d_model = 16;
    cfg.heads = 2;
    cfg.chunk_steps = 3;
    cfg.action_dims = 4;
    cfg.max_image_tokens = 2;
    cfg.max_text_tokens = 2;
    const HeadParams params = HeadParams::random(cfg, 18, 0.3);
    std::mt19937_64 rng(19);
    const TokenBundle bundle = random_bundle(rng, 1, 2, 1, 16);
    const auto labels = random_labels(rng, 3, 4);

    std::vector<std::size_t> perm{2, 0, 3, 1};
    HeadParams permuted = params;
    auto perm_labels = labels;
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t j = 0; j < 4; ++j) {
            const std::size_t src = k * 4 + perm[j];
            const std::size_t dst = k * 4 + j;
            std::copy(params.queries.row(src), params.queries.row(src) + 16,
                      permuted.queries.row(dst));
            perm_labels[k][j] = labels[k][perm[j]];
        }
    }

    LossWeights lw;
    lw.label_smoothing = 0.05;
    lw.lambda_entropy = 1e-3;
    lw.lambda_temporal = 1e-3;
    const LossBreakdown a =
        paracat_loss(paracat_forward(bundle, params, cfg), labels, lw);
    const LossBreakdown b =
        paracat_loss(paracat_forward(bundle, permuted, cfg), perm_labels, lw);
    CHECK(b.total == doctest::Approx(a.total).epsilon(1e-9));
}

TEST_CASE("toy task: zero steps stays at chance, training is deterministic") {
    HeadConfig cfg;
    cfg.depth = 1;
    cfg.d_model = 32;
    cfg.heads = 4;
    cfg.chunk_steps = 2;
    cfg.action_dims = 2;
    cfg.max_image_tokens = 2;
    cfg.max_text_tokens = 2;

    ToyTaskSpec task;
    task.steps = 0;
    task.eval_samples = 400;
    task.seed = 20;
    const ToyTrainResult untouched = train_toy(task, cfg);
    CHECK(untouched.mean_accuracy == doctest::Approx(1.0 / 3.0).epsilon(0.3));
    CHECK(std::abs(untouched.mean_accuracy - 1.0 / 3.0) < 0.1);

    ToyTaskSpec brief = task;
    brief.steps = 40;
    brief.batch = 8;
    const ToyTrainResult a = train_toy(brief, cfg);
    const ToyTrainResult b = train_toy(brief, cfg);
    CHECK(a.final_loss == b.final_loss);  // bit-identical per seed
    CHECK(a.mean_accuracy == b.mean_accuracy);
}

TEST_CASE("head params survive a save/load round trip") {
    HeadConfig cfg;
    cfg.depth = 1;
    cfg.d_model = 16;
    cfg.heads = 2;
    cfg.chunk_steps = 2;
    cfg.action_dims = 2;
    cfg.max_image_tokens = 2;
    cfg.max_text_tokens = 2;
    const HeadParams params = HeadParams::random(cfg, 21, 0.3);
    const std::string path =
        (std::filesystem::temp_directory_path() / "saivla_head_params.svc").string();
    save_head_params(params, cfg, path, 1700000000);
    const HeadParams loaded = load_head_params(path, cfg);

    std::mt19937_64 rng(22);
    const TokenBundle bundle = random_bundle(rng, 1, 2, 1, 16);
    const ActionChunk x = paracat_forward(bundle, params, cfg);
    const ActionChunk y = paracat_forward(bundle, loaded, cfg);
    for (std::size_t i = 0; i < x.logits.data.size(); ++i) {
        CHECK(x.logits.data[i] == y.logits.data[i]);  // f64 payloads are exact
    }
    std::filesystem::remove(path);
}
