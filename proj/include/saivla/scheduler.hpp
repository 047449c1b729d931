#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace saivla {

struct LatencyModel {
    double brain_once_ms = 120.0;
    double cere_fwd_ms = 12.0;
    double roi_ms = 1.0;
    // When > 0, latencies are drawn lognormal around the mean with this
    // sigma (in log space), deterministically from the simulation seed.
    double lognormal_sigma = 0.0;
};

struct ScheduleConfig {
    std::size_t brain_interval = 5;  // N: one brain call every N chunks
    std::size_t chunk_steps = 20;    // K: steps per cerebellum forward
    double f_fwd = 2.0;              // cerebellum forward rate, Hz
    double flops_brain_once = 0.0;
    double flops_cere_per_fwd = 0.0;
    double flops_cere_per_step = 0.0;
    LatencyModel latency;

    void validate() const;
};

enum class EventKind : std::uint8_t { BrainCall = 0, CereForward = 1, StepExec = 2 };

const char* event_kind_name(EventKind k);

struct ScheduleEvent {
    double t = 0.0;  // seconds since simulation start
    EventKind kind = EventKind::StepExec;
    std::size_t chunk = 0;
    std::size_t step = 0;  // 1..K for StepExec, 0 otherwise
    double latency_ms = 0.0;
};

struct ScheduleSummary {
    std::size_t chunks = 0;
    std::size_t brain_calls = 0;
    std::size_t steps = 0;
    double duration_s = 0.0;
    double f_fwd_achieved = 0.0;
    double f_eff = 0.0;
    double mean_brain_latency_ms = 0.0;
    double mean_cere_latency_ms = 0.0;
};

struct ScheduleTrace {
    std::vector<ScheduleEvent> events;
    ScheduleSummary summary;
};

// Deterministic fixed-ratio timeline: a cerebellum forward per chunk at
// rate f_fwd, K executed steps per forward, and one brain call at the head
// of every N-chunk group. The brain call overlaps the running chunk; its
// context applies from the next chunk.
ScheduleTrace simulate(const ScheduleConfig& cfg, std::size_t chunks,
                       std::uint64_t seed);

enum class BudgetMode : std::uint8_t { PerStep = 0, PerForward = 1 };

// PerStep:    (1/N) * flops_brain_once + f_eff * flops_cere_per_step
// PerForward: (1/N) * flops_brain_once + f_fwd * flops_cere_per_fwd
double compute_budget(const ScheduleConfig& cfg, BudgetMode mode);

// Compute-normalized success: success rate per (FLOPs/second).
double sr_cn(double success_rate, double c_budget);

// Documentation helper: dense-transformer FLOPs estimate (2 * params * tokens).
double estimate_transformer_flops(double params, double tokens);

}  // namespace saivla
