#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "saivla/decoder.hpp"  // Ternary

namespace saivla {

struct JerkStats {
    double mean_abs = 0.0;
    double p95_abs = 0.0;
    std::size_t samples = 0;
};

struct StabilityReport {
    std::vector<double> jitter_rate;  // per dimension, flips per step
    std::vector<JerkStats> jerk;      // per dimension
    std::size_t steps = 0;
};

// rate[j] = (# of t with decisions[t][j] != decisions[t-1][j]) / (T-1)
std::vector<double> jitter_rate(const std::vector<std::vector<Ternary>>& decisions);

// Third backward difference of the executed command:
// jerk_t = (u_t - 3 u_{t-1} + 3 u_{t-2} - u_{t-3}) / dt^3, t = 3..T-1.
// Reports mean |jerk| and the 95th percentile per dimension.
std::vector<JerkStats> jerk(const std::vector<std::vector<double>>& commands,
                            double dt);

StabilityReport stability_report(const std::vector<std::vector<Ternary>>& decisions,
                                 const std::vector<std::vector<double>>& commands,
                                 double dt);

struct EnvironmentDescriptor {
    std::string device = "cpu";
    std::string resolution = "n/a";
    std::size_t batch = 1;
};

struct TimingReport {
    double median_ms = 0.0;
    double iqr_ms = 0.0;
    std::size_t repeats = 0;
    std::size_t warmup = 0;
    std::vector<double> samples_ms;
    EnvironmentDescriptor environment;
    std::string amortization_note;
};

// Median-of-repeats wall-clock protocol: warmup runs are executed but not
// counted; needs repeats >= 11 and warmup >= 3. Workload failures carry the
// repeat index.
TimingReport timing_protocol(const std::function<void()>& workload,
                             std::size_t repeats, std::size_t warmup,
                             const EnvironmentDescriptor& env = {});

// Linear-interpolation percentile of |values| (q in [0,100]).
double percentile(std::vector<double> values, double q);

}  // namespace saivla
