#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saivla/paracat.hpp"

namespace saivla {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;
    double clip_norm = 1.0;  // global L2 clip; <= 0 disables
};

// Adam with decoupled weight decay over the HeadParams buffer set.
class AdamW {
public:
    AdamW(const HeadParams& shape, AdamWConfig cfg);
    // Applies one update in place; grads are consumed read-only.
    void step(HeadParams& params, const HeadParams& grads);
    std::size_t steps_taken() const { return t_; }

private:
    AdamWConfig cfg_;
    HeadParams m_;
    HeadParams v_;
    std::size_t t_ = 0;
};

// Synthetic copy task: each sample hides a ternary K x D grid in the leading
// entries of the state token; the labels are that grid. The head has to
// learn to route per-cell information from the state token to its queries.
struct ToyTaskSpec {
    std::size_t context_tokens = 1;
    std::size_t image_tokens = 1;
    std::size_t text_tokens = 1;
    std::size_t steps = 2000;
    std::size_t batch = 32;
    std::size_t eval_samples = 300;
    AdamWConfig optimizer;
    LossWeights loss;
    std::uint64_t seed = 0;
};

struct ToyTrainResult {
    HeadParams params;
    std::vector<double> dim_accuracy;  // held-out, per dimension
    double mean_accuracy = 0.0;
    double min_dim_accuracy = 0.0;
    double final_loss = 0.0;
    std::size_t steps_run = 0;
};

// Deterministic given the seed. Throws NumericalFailure (with the step
// index) if the loss goes non-finite.
ToyTrainResult train_toy(const ToyTaskSpec& task, const HeadConfig& cfg);

// Evaluate per-dimension argmax accuracy of params on freshly drawn samples.
std::vector<double> eval_toy(const HeadParams& params, const HeadConfig& cfg,
                             const ToyTaskSpec& task, std::uint64_t eval_seed);

// Parameter persistence through the cache archive format, one named tensor
// per parameter buffer.
void save_head_params(const HeadParams& params, const HeadConfig& cfg,
                      const std::string& path, std::int64_t timestamp_utc);
HeadParams load_head_params(const std::string& path, const HeadConfig& cfg);

}  // namespace saivla
