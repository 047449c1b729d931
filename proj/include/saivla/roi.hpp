#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace saivla {

struct ImageDims {
    std::size_t width = 1028;
    std::size_t height = 800;
};

struct Intrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
};

struct Extrinsics {
    std::array<std::array<double, 3>, 3> rotation{};  // world -> camera
    std::array<double, 3> translation{};              // meters
};

struct CameraCalib {
    Intrinsics intrinsics;
    Extrinsics extrinsics;
    ImageDims dims;
    std::vector<double> distortion;  // accepted but ignored (pinhole model)

    // Checks fx/fy positivity and rotation orthonormality (R R^T = I within
    // 1e-6, det +1). Throws InvalidArgument on failure.
    void validate() const;

    static CameraCalib identity(double fx, double fy, double cx, double cy,
                                ImageDims dims = {});
    static CameraCalib load(const std::string& path);
    void save(const std::string& path) const;
};

struct Projection {
    double u = 0.0;
    double v = 0.0;
    double z = 0.0;  // camera-frame depth, meters
};

// p_cam = R p_world + t; u = fx x/z + cx, v = fy y/z + cy.
// Throws BehindCamera when z <= 0.
Projection project_point(const std::array<double, 3>& p_world,
                         const CameraCalib& calib);
// Same transform, nullopt instead of throwing for the fallback path.
std::optional<Projection> try_project_point(const std::array<double, 3>& p_world,
                                            const CameraCalib& calib);

enum class RoiSide : std::uint8_t { Left = 0, Right = 1 };

struct Rect {
    std::int64_t x0 = 0;
    std::int64_t y0 = 0;
    std::int64_t x1 = 0;
    std::int64_t y1 = 0;
};

struct RoiCrop {
    double center_u = 0.0;
    double center_v = 0.0;
    Rect rect;
    RoiSide side = RoiSide::Left;
    std::size_t crop_size = 256;
    double confidence = 0.0;
    bool fallback = false;
};

// Exactly crop x crop; shifted (never shrunk) to stay inside the image.
Rect roi_rect(double center_u, double center_v, std::size_t crop, ImageDims dims);

struct RoiConfidence {
    double confidence = 0.0;
    bool fallback = false;
};

// confidence = frame-margin factor * depth validity * (1 - occlusion hint);
// fallback when confidence < threshold or the projection was behind camera.
RoiConfidence roi_confidence(const std::optional<Projection>& proj, ImageDims dims,
                             double occlusion_hint, std::size_t crop = 256,
                             double threshold = 0.5);

// Full per-side pipeline: project, crop, score.
RoiCrop make_roi(const std::array<double, 3>& effector_world, RoiSide side,
                 const CameraCalib& calib, double occlusion_hint,
                 std::size_t crop = 256);

}  // namespace saivla
