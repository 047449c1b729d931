#include "saivla/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "saivla/errors.hpp"

namespace saivla {

DecoderConfig DecoderConfig::defaults(std::size_t dims, double step) {
    DecoderConfig cfg;
    cfg.step_sizes.assign(dims, step);
    return cfg;
}

void DecoderConfig::validate() const {
    if (theta_up < 0.0 || theta_up >= 1.0 || theta_down < 0.0 || theta_down >= 1.0) {
        throw InvalidArgument("DecoderConfig: thresholds must be in [0,1)");
    }
    if (alpha < 0.0 || alpha >= 1.0) {
        throw InvalidArgument("DecoderConfig: alpha must be in [0,1)");
    }
    for (double s : step_sizes) {
        if (!(s > 0.0)) throw InvalidArgument("DecoderConfig: step sizes must be positive");
    }
    if (!(temperature.start > 0.0) || !(temperature.end > 0.0)) {
        throw InvalidArgument("DecoderConfig: temperatures must be positive");
    }
    if (entropy_cap < 0.0) throw InvalidArgument("DecoderConfig: entropy cap < 0");
}

DecoderState DecoderState::initial(std::size_t dims) {
    DecoderState s;
    s.prev_decisions.assign(dims, 0);  // stationary start
    s.ema.assign(dims, 0.0);
    return s;
}

std::vector<Ternary> decode_step(const std::vector<ProbVector3>& probs,
                                 DecoderState& state, const DecoderConfig& cfg) {
    const std::size_t dims = state.prev_decisions.size();
    if (probs.size() != dims) {
        throw InvalidArgument("decode_step: dimension count mismatch");
    }
    std::vector<Ternary> out(dims);
    for (std::size_t j = 0; j < dims; ++j) {
        const ProbVector3& p = probs[j];
        if (!p.normalized()) {
            throw InvalidArgument("decode_step: probabilities not normalized");
        }
        const double margin_up = p.p_plus - p.p_zero;
        const double margin_down = p.p_minus - p.p_zero;
        const bool up = margin_up > cfg.theta_up;
        const bool down = margin_down > cfg.theta_down;
        Ternary d = state.prev_decisions[j];
        if (up && down) {
            if (margin_up > margin_down) {
                d = +1;
            } else if (margin_down > margin_up) {
                d = -1;
            }
            // exact tie: hold
        } else if (up) {
            d = +1;
        } else if (down) {
            d = -1;
        }
        out[j] = d;
    }
    state.prev_decisions = out;
    ++state.step;
    return out;
}

std::vector<double> ema_update(DecoderState& state,
                               const std::vector<Ternary>& decisions,
                               const DecoderConfig& cfg) {
    const std::size_t dims = state.ema.size();
    if (decisions.size() != dims || cfg.step_sizes.size() != dims) {
        throw InvalidArgument("ema_update: dimension count mismatch");
    }
    for (std::size_t j = 0; j < dims; ++j) {
        if (!std::isfinite(state.ema[j])) {
            throw NumericalFailure("ema_update: non-finite accumulator");
        }
        const double target = static_cast<double>(decisions[j]) * cfg.step_sizes[j];
        state.ema[j] = cfg.alpha * state.ema[j] + (1.0 - cfg.alpha) * target;
    }
    return state.ema;
}

double anneal_temperature(std::size_t step, const DecoderConfig& cfg) {
    const TemperatureSchedule& s = cfg.temperature;
    if (s.horizon == 0 || step >= s.horizon) return s.end;
    const double frac = static_cast<double>(step) / static_cast<double>(s.horizon);
    return s.start + (s.end - s.start) * frac;
}

DecoderConfig conservative_mode(bool roi_confident, double mean_entropy,
                                const DecoderConfig& cfg) {
    if (mean_entropy < 0.0) {
        throw InvalidArgument("conservative_mode: negative entropy");
    }
    if (roi_confident && mean_entropy <= cfg.entropy_cap) return cfg;
    DecoderConfig out = cfg;
    out.temperature.start = cfg.temperature.start * cfg.conservative.tau_multiplier;
    out.temperature.end = cfg.temperature.end * cfg.conservative.tau_multiplier;
    out.theta_up = cfg.theta_up + cfg.conservative.theta_boost;
    out.theta_down = cfg.theta_down + cfg.conservative.theta_boost;
    out.alpha = std::min(cfg.alpha + cfg.conservative.alpha_boost, 0.99);
    return out;
}

}  // namespace saivla
