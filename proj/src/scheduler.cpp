#include "saivla/scheduler.hpp"

#include <cmath>
#include <random>

#include "saivla/errors.hpp"

namespace saivla {

void ScheduleConfig::validate() const {
    if (brain_interval < 1) throw InvalidArgument("ScheduleConfig: N must be >= 1");
    if (chunk_steps < 1) throw InvalidArgument("ScheduleConfig: K must be >= 1");
    if (!(f_fwd > 0.0)) throw InvalidArgument("ScheduleConfig: f_fwd must be positive");
    if (flops_brain_once < 0.0 || flops_cere_per_fwd < 0.0 || flops_cere_per_step < 0.0) {
        throw InvalidArgument("ScheduleConfig: FLOPs terms must be nonnegative");
    }
}

const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::BrainCall: return "brain_call";
        case EventKind::CereForward: return "cere_forward";
        case EventKind::StepExec: return "step_exec";
    }
    return "unknown";
}

namespace {

class LatencySampler {
public:
    LatencySampler(const LatencyModel& model, std::uint64_t seed)
        : model_(model), rng_(seed) {}

    double brain() { return draw(model_.brain_once_ms); }
    double cere() { return draw(model_.cere_fwd_ms + model_.roi_ms); }

private:
    double draw(double mean_ms) {
        if (model_.lognormal_sigma <= 0.0 || mean_ms <= 0.0) return mean_ms;
        // Parameterized so the drawn latency has the configured mean.
        const double sigma = model_.lognormal_sigma;
        const double mu = std::log(mean_ms) - 0.5 * sigma * sigma;
        std::lognormal_distribution<double> dist(mu, sigma);
        return dist(rng_);
    }

    LatencyModel model_;
    std::mt19937_64 rng_;
};

}  // namespace

ScheduleTrace simulate(const ScheduleConfig& cfg, std::size_t chunks,
                       std::uint64_t seed) {
    cfg.validate();
    if (chunks < 1) throw InvalidArgument("simulate: chunks must be >= 1");

    LatencySampler latency(cfg.latency, seed);
    ScheduleTrace trace;
    trace.events.reserve(chunks * (cfg.chunk_steps + 2));

    const double forward_period = 1.0 / cfg.f_fwd;
    const double step_period = forward_period / static_cast<double>(cfg.chunk_steps);

    double brain_latency_sum = 0.0;
    double cere_latency_sum = 0.0;
    std::size_t brain_calls = 0;

    for (std::size_t c = 0; c < chunks; ++c) {
        const double t_chunk = static_cast<double>(c) * forward_period;
        if (c % cfg.brain_interval == 0) {
            const double lat = latency.brain();
            brain_latency_sum += lat;
            ++brain_calls;
            trace.events.push_back({t_chunk, EventKind::BrainCall, c, 0, lat});
        }
        const double fwd_lat = latency.cere();
        cere_latency_sum += fwd_lat;
        trace.events.push_back({t_chunk, EventKind::CereForward, c, 0, fwd_lat});
        for (std::size_t k = 1; k <= cfg.chunk_steps; ++k) {
            const double t_step = t_chunk + static_cast<double>(k) * step_period;
            trace.events.push_back({t_step, EventKind::StepExec, c, k, 0.0});
        }
    }

    ScheduleSummary& s = trace.summary;
    s.chunks = chunks;
    s.brain_calls = brain_calls;
    s.steps = chunks * cfg.chunk_steps;
    s.duration_s = static_cast<double>(chunks) * forward_period;
    s.f_fwd_achieved = static_cast<double>(chunks) / s.duration_s;
    s.f_eff = static_cast<double>(s.steps) / s.duration_s;
    s.mean_brain_latency_ms = brain_calls ? brain_latency_sum / brain_calls : 0.0;
    s.mean_cere_latency_ms = cere_latency_sum / static_cast<double>(chunks);
    return trace;
}

double compute_budget(const ScheduleConfig& cfg, BudgetMode mode) {
    cfg.validate();
    const double brain_term =
        cfg.flops_brain_once / static_cast<double>(cfg.brain_interval);
    if (mode == BudgetMode::PerForward) {
        return brain_term + cfg.f_fwd * cfg.flops_cere_per_fwd;
    }
    const double f_eff = cfg.f_fwd * static_cast<double>(cfg.chunk_steps);
    return brain_term + f_eff * cfg.flops_cere_per_step;
}

double sr_cn(double success_rate, double c_budget) {
    if (!(c_budget > 0.0)) throw InvalidArgument("sr_cn: budget must be positive");
    return success_rate / c_budget;
}

double estimate_transformer_flops(double params, double tokens) {
    return 2.0 * params * tokens;
}

}  // namespace saivla
