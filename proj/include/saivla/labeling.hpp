#pragma once

#include <cstdint>
#include <vector>

#include "saivla/decoder.hpp"  // Ternary

namespace saivla {

enum class DimensionKind : std::uint8_t { Position = 0, Rotation = 1, Gripper = 2 };

// Per-dimension quantization grid. Positions in mm, rotations/grippers in deg.
struct ControlGrid {
    std::vector<double> step_sizes;        // delta per step, > 0
    std::vector<double> deadbands;         // zero band half-width, in [0, step)
    std::vector<DimensionKind> kinds;

    std::size_t dims() const { return step_sizes.size(); }
    void validate() const;

    // 16-dim default: two 7-DoF arms (3 position + 4 rotation each, 5 mm / 1 deg
    // grids) plus two gripper open/close channels on the angular grid.
    static ControlGrid dual_arm_default(double delta_p_mm = 5.0,
                                        double delta_theta_deg = 1.0);
    static ControlGrid uniform(std::size_t dims, double step,
                               DimensionKind kind = DimensionKind::Position);
};

struct LabeledTrajectory {
    std::vector<double> timestamps;          // seconds, length T
    std::vector<std::vector<double>> deltas; // T x D
    std::vector<std::vector<Ternary>> labels;// T x D
    std::vector<double> frame_weights;       // T, in (0,1]
};

// 3 * MAD-based robust sigma per dimension, clamped just below the step size.
// Needs at least 30 stationary samples per dimension.
std::vector<double> calibrate_deadband(const std::vector<std::vector<double>>& noise_samples,
                                       const ControlGrid& grid);

// Sign quantization with deadbands; values exactly at the boundary map to 0.
std::vector<std::vector<Ternary>> quantize_deltas(
    const std::vector<std::vector<double>>& deltas, const ControlGrid& grid);

// Per-frame robust down-weighting: w_t = min(1, (3*sigma / max(speed_t, eps))^2)
// where speed_t is the frame's delta norm over its dt and sigma is the robust
// scale (1.4826 * median) of the speed magnitudes.
std::vector<double> outlier_weights(const std::vector<std::vector<double>>& deltas,
                                    const std::vector<double>& timestamps);

struct LabelChunks {
    std::vector<std::vector<std::vector<Ternary>>> chunks;  // n x K x D
    std::vector<std::vector<bool>> masks;                   // n x K, true = real step
};

enum class Smoothing : std::uint8_t { Off = 0, Majority = 1 };

// Split T steps into ceil(T/K) chunks of K, zero-padding the tail under a
// mask. Optional global majority smoothing (odd window, ties keep the
// original label) runs before chunking.
LabelChunks align_to_grid(const std::vector<std::vector<Ternary>>& labels,
                          std::size_t chunk_steps, Smoothing smoothing = Smoothing::Off,
                          std::size_t window = 3);

// Inverse of align_to_grid: concatenate chunks and drop padded steps.
std::vector<std::vector<Ternary>> reassemble_chunks(const LabelChunks& chunks);

}  // namespace saivla
