#include "saivla/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "saivla/errors.hpp"

namespace saivla {

namespace {

constexpr double kMadToSigma = 1.4826;
constexpr double kSigmaMultiplier = 3.0;
constexpr double kSpeedEps = 1e-12;
constexpr double kDeadbandClamp = 0.999;  // keep deadband strictly below step
constexpr std::size_t kMinCalibSamples = 30;

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

double mad_sigma(const std::vector<double>& v) {
    const double med = median(v);
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
    return kMadToSigma * median(dev);
}

}  // namespace

void ControlGrid::validate() const {
    const std::size_t d = step_sizes.size();
    if (deadbands.size() != d || kinds.size() != d) {
        throw InvalidArgument("ControlGrid: field lengths disagree");
    }
    for (std::size_t j = 0; j < d; ++j) {
        if (!(step_sizes[j] > 0.0)) {
            throw InvalidArgument("ControlGrid: step sizes must be positive");
        }
        if (deadbands[j] < 0.0 || deadbands[j] >= step_sizes[j]) {
            throw InvalidArgument("ControlGrid: deadband must be in [0, step)");
        }
    }
}

ControlGrid ControlGrid::dual_arm_default(double delta_p_mm, double delta_theta_deg) {
    ControlGrid g;
    for (int arm = 0; arm < 2; ++arm) {
        for (int j = 0; j < 3; ++j) {
            g.step_sizes.push_back(delta_p_mm);
            g.kinds.push_back(DimensionKind::Position);
        }
        for (int j = 0; j < 4; ++j) {
            g.step_sizes.push_back(delta_theta_deg);
            g.kinds.push_back(DimensionKind::Rotation);
        }
    }
    // Gripper channels use symmetric thresholds on the angular grid.
    for (int j = 0; j < 2; ++j) {
        g.step_sizes.push_back(delta_theta_deg);
        g.kinds.push_back(DimensionKind::Gripper);
    }
    g.deadbands.assign(g.step_sizes.size(), 0.0);
    return g;
}

ControlGrid ControlGrid::uniform(std::size_t dims, double step, DimensionKind kind) {
    ControlGrid g;
    g.step_sizes.assign(dims, step);
    g.deadbands.assign(dims, 0.0);
    g.kinds.assign(dims, kind);
    return g;
}

std::vector<double> calibrate_deadband(
    const std::vector<std::vector<double>>& noise_samples, const ControlGrid& grid) {
    grid.validate();
    const std::size_t dims = grid.dims();
    if (noise_samples.size() < kMinCalibSamples) {
        throw InsufficientData("calibrate_deadband: need at least 30 noise samples");
    }
    std::vector<double> deadband(dims);
    for (std::size_t j = 0; j < dims; ++j) {
        std::vector<double> column;
        column.reserve(noise_samples.size());
        for (const auto& row : noise_samples) {
            if (row.size() != dims) {
                throw InvalidArgument("calibrate_deadband: sample width mismatch");
            }
            column.push_back(row[j]);
        }
        const double db = kSigmaMultiplier * mad_sigma(column);
        deadband[j] = std::min(db, kDeadbandClamp * grid.step_sizes[j]);
    }
    return deadband;
}

std::vector<std::vector<Ternary>> quantize_deltas(
    const std::vector<std::vector<double>>& deltas, const ControlGrid& grid) {
    grid.validate();
    const std::size_t dims = grid.dims();
    std::vector<std::vector<Ternary>> labels(deltas.size());
    for (std::size_t t = 0; t < deltas.size(); ++t) {
        if (deltas[t].size() != dims) {
            throw InvalidArgument("quantize_deltas: row width mismatch at t=" +
                                  std::to_string(t));
        }
        labels[t].resize(dims);
        for (std::size_t j = 0; j < dims; ++j) {
            const double d = deltas[t][j];
            if (std::isnan(d)) {
                throw InvalidArgument("quantize_deltas: NaN delta at (" +
                                      std::to_string(t) + "," + std::to_string(j) + ")");
            }
            const double band = grid.deadbands[j];
            labels[t][j] = d > band ? Ternary{+1} : (d < -band ? Ternary{-1} : Ternary{0});
        }
    }
    return labels;
}

std::vector<double> outlier_weights(const std::vector<std::vector<double>>& deltas,
                                    const std::vector<double>& timestamps) {
    if (deltas.size() != timestamps.size()) {
        throw InvalidArgument("outlier_weights: deltas/timestamps length mismatch");
    }
    const std::size_t n = deltas.size();
    if (n == 0) return {};
    for (std::size_t t = 1; t < n; ++t) {
        if (!(timestamps[t] > timestamps[t - 1])) {
            throw InvalidArgument("outlier_weights: timestamps not strictly increasing");
        }
    }
    std::vector<double> speed(n);
    for (std::size_t t = 0; t < n; ++t) {
        double norm2 = 0.0;
        for (double d : deltas[t]) norm2 += d * d;
        double dt = 1.0;
        if (t > 0) {
            dt = timestamps[t] - timestamps[t - 1];
        } else if (n > 1) {
            dt = timestamps[1] - timestamps[0];
        }
        speed[t] = std::sqrt(norm2) / dt;
    }
    // Robust scale of the speed magnitudes about zero; if the trajectory is
    // entirely stationary there is nothing to down-weight.
    const double sigma = kMadToSigma * median(speed);
    std::vector<double> w(n, 1.0);
    if (sigma <= 0.0) return w;
    for (std::size_t t = 0; t < n; ++t) {
        const double ratio = kSigmaMultiplier * sigma / std::max(speed[t], kSpeedEps);
        w[t] = std::min(1.0, ratio * ratio);
    }
    return w;
}

namespace {

std::vector<std::vector<Ternary>> majority_smooth(
    const std::vector<std::vector<Ternary>>& labels, std::size_t window) {
    if (window < 1 || window % 2 == 0) {
        throw InvalidArgument("majority_smooth: window must be odd and >= 1");
    }
    const std::size_t T = labels.size();
    if (T == 0) return labels;
    const std::size_t D = labels[0].size();
    const std::size_t half = window / 2;
    std::vector<std::vector<Ternary>> out(T, std::vector<Ternary>(D));
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t lo = t >= half ? t - half : 0;
        const std::size_t hi = std::min(T - 1, t + half);
        for (std::size_t j = 0; j < D; ++j) {
            int counts[3] = {0, 0, 0};  // -1, 0, +1
            for (std::size_t s = lo; s <= hi; ++s) {
                counts[labels[s][j] + 1]++;
            }
            int best = labels[t][j] + 1;  // ties keep the original label
            for (int c = 0; c < 3; ++c) {
                if (counts[c] > counts[best]) best = c;
            }
            out[t][j] = static_cast<Ternary>(best - 1);
        }
    }
    return out;
}

}  // namespace

LabelChunks align_to_grid(const std::vector<std::vector<Ternary>>& labels,
                          std::size_t chunk_steps, Smoothing smoothing,
                          std::size_t window) {
    if (chunk_steps < 1) throw InvalidArgument("align_to_grid: K must be >= 1");
    if (labels.empty()) throw InvalidArgument("align_to_grid: empty label stream");
    const std::size_t T = labels.size();
    const std::size_t D = labels[0].size();

    std::vector<std::vector<Ternary>> stream =
        smoothing == Smoothing::Majority ? majority_smooth(labels, window) : labels;

    const std::size_t n_chunks = (T + chunk_steps - 1) / chunk_steps;
    LabelChunks out;
    out.chunks.assign(n_chunks, std::vector<std::vector<Ternary>>(
                                    chunk_steps, std::vector<Ternary>(D, 0)));
    out.masks.assign(n_chunks, std::vector<bool>(chunk_steps, false));
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t c = t / chunk_steps;
        const std::size_t k = t % chunk_steps;
        out.chunks[c][k] = stream[t];
        out.masks[c][k] = true;
    }
    return out;
}

std::vector<std::vector<Ternary>> reassemble_chunks(const LabelChunks& chunks) {
    std::vector<std::vector<Ternary>> out;
    for (std::size_t c = 0; c < chunks.chunks.size(); ++c) {
        for (std::size_t k = 0; k < chunks.chunks[c].size(); ++k) {
            if (chunks.masks[c][k]) out.push_back(chunks.chunks[c][k]);
        }
    }
    return out;
}

}  // namespace saivla
