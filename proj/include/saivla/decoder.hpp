#pragma once

#include <cstdint>
#include <vector>

#include "saivla/numerics.hpp"

namespace saivla {

using Ternary = std::int8_t;  // -1, 0, +1

struct TemperatureSchedule {
    double start = 1.5;
    double end = 0.7;
    std::size_t horizon = 1000;  // steps until fully annealed
};

struct ConservativeOverrides {
    double tau_multiplier = 1.5;
    double theta_boost = 0.1;
    double alpha_boost = 0.1;
};

struct DecoderConfig {
    double theta_up = 0.2;    // margin for switching to +1
    double theta_down = 0.2;  // margin for switching to -1
    double alpha = 0.8;       // EMA coefficient
    std::vector<double> step_sizes;  // per-dimension command unit (mm or deg)
    TemperatureSchedule temperature;
    double entropy_cap = 0.9;  // nats, mean-entropy gate
    ConservativeOverrides conservative;

    static DecoderConfig defaults(std::size_t dims, double step = 5.0);
    void validate() const;
};

struct DecoderState {
    std::vector<Ternary> prev_decisions;
    std::vector<double> ema;  // u_{t-1}
    std::size_t step = 0;
    bool conservative = false;

    static DecoderState initial(std::size_t dims);
};

// Hysteresis rule per dimension: switch only when the winning class clears
// its margin over the zero class, otherwise hold the previous decision.
// When both margins are exceeded the larger one wins; an exact tie holds.
std::vector<Ternary> decode_step(const std::vector<ProbVector3>& probs,
                                 DecoderState& state, const DecoderConfig& cfg);

// u_t = alpha * u_{t-1} + (1 - alpha) * (decisions ⊙ step_sizes)
std::vector<double> ema_update(DecoderState& state,
                               const std::vector<Ternary>& decisions,
                               const DecoderConfig& cfg);

// Linear anneal from start to end over the horizon, clamped afterwards.
double anneal_temperature(std::size_t step, const DecoderConfig& cfg);

// Pure config transform: when the ROI is not confident or the mean decision
// entropy exceeds the cap, raise temperature and strengthen hysteresis/EMA.
DecoderConfig conservative_mode(bool roi_confident, double mean_entropy,
                                const DecoderConfig& cfg);

}  // namespace saivla
