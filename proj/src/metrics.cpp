#include "saivla/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "saivla/errors.hpp"

namespace saivla {

std::vector<double> jitter_rate(const std::vector<std::vector<Ternary>>& decisions) {
    const std::size_t T = decisions.size();
    if (T < 2) throw InsufficientData("jitter_rate: need at least 2 steps");
    const std::size_t D = decisions[0].size();
    std::vector<double> rate(D, 0.0);
    for (std::size_t t = 1; t < T; ++t) {
        if (decisions[t].size() != D) {
            throw InvalidArgument("jitter_rate: ragged decision stream");
        }
        for (std::size_t j = 0; j < D; ++j) {
            if (decisions[t][j] != decisions[t - 1][j]) rate[j] += 1.0;
        }
    }
    for (double& r : rate) r /= static_cast<double>(T - 1);
    return rate;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw InsufficientData("percentile: empty input");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::vector<JerkStats> jerk(const std::vector<std::vector<double>>& commands,
                            double dt) {
    const std::size_t T = commands.size();
    if (T < 4) throw InsufficientData("jerk: need at least 4 steps");
    if (!(dt > 0.0)) throw InvalidArgument("jerk: dt must be positive");
    const std::size_t D = commands[0].size();
    const double inv_dt3 = 1.0 / (dt * dt * dt);

    std::vector<std::vector<double>> abs_jerk(D);
    for (std::size_t t = 3; t < T; ++t) {
        if (commands[t].size() != D) throw InvalidArgument("jerk: ragged command stream");
        for (std::size_t j = 0; j < D; ++j) {
            const double v = (commands[t][j] - 3.0 * commands[t - 1][j] +
                              3.0 * commands[t - 2][j] - commands[t - 3][j]) *
                             inv_dt3;
            abs_jerk[j].push_back(std::abs(v));
        }
    }
    std::vector<JerkStats> out(D);
    for (std::size_t j = 0; j < D; ++j) {
        JerkStats& s = out[j];
        s.samples = abs_jerk[j].size();
        double sum = 0.0;
        for (double v : abs_jerk[j]) sum += v;
        s.mean_abs = sum / static_cast<double>(s.samples);
        s.p95_abs = percentile(abs_jerk[j], 95.0);
    }
    return out;
}

StabilityReport stability_report(const std::vector<std::vector<Ternary>>& decisions,
                                 const std::vector<std::vector<double>>& commands,
                                 double dt) {
    StabilityReport r;
    r.jitter_rate = jitter_rate(decisions);
    r.jerk = jerk(commands, dt);
    r.steps = decisions.size();
    return r;
}

TimingReport timing_protocol(const std::function<void()>& workload,
                             std::size_t repeats, std::size_t warmup,
                             const EnvironmentDescriptor& env) {
    if (repeats < 11) throw InvalidArgument("timing_protocol: repeats must be >= 11");
    if (warmup < 3) throw InvalidArgument("timing_protocol: warmup must be >= 3");

    using Clock = std::chrono::steady_clock;
    for (std::size_t i = 0; i < warmup; ++i) {
        try {
            workload();
        } catch (const std::exception& e) {
            throw std::runtime_error("timing_protocol: workload failed in warmup " +
                                     std::to_string(i) + ": " + e.what());
        }
    }
    TimingReport report;
    report.repeats = repeats;
    report.warmup = warmup;
    report.environment = env;
    report.amortization_note =
        "stage-A cache generation is timed separately and amortized across "
        "training iterations; numbers here cover the online path only";
    report.samples_ms.reserve(repeats);
    for (std::size_t i = 0; i < repeats; ++i) {
        const auto t0 = Clock::now();
        try {
            workload();
        } catch (const std::exception& e) {
            throw std::runtime_error("timing_protocol: workload failed at repeat " +
                                     std::to_string(i) + ": " + e.what());
        }
        const auto t1 = Clock::now();
        report.samples_ms.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    report.median_ms = percentile(report.samples_ms, 50.0);
    report.iqr_ms =
        percentile(report.samples_ms, 75.0) - percentile(report.samples_ms, 25.0);
    return report;
}

}  // namespace saivla
