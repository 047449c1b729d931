#include "saivla/roi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "saivla/errors.hpp"

namespace saivla {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

double dot3(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

double det3(const Mat3& r) {
    return r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
           r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
           r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
}

}  // namespace

void CameraCalib::validate() const {
    if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
        throw InvalidArgument("CameraCalib: focal lengths must be positive");
    }
    if (dims.width == 0 || dims.height == 0) {
        throw InvalidArgument("CameraCalib: zero image dimensions");
    }
    const Mat3& r = extrinsics.rotation;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            // row_i . row_j must equal delta_ij
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += r[i][k] * r[j][k];
            const double expect = i == j ? 1.0 : 0.0;
            if (std::abs(acc - expect) > 1e-6) {
                throw InvalidArgument("CameraCalib: rotation not orthonormal");
            }
        }
    }
    if (std::abs(det3(r) - 1.0) > 1e-6) {
        throw InvalidArgument("CameraCalib: rotation determinant != +1");
    }
    if (!distortion.empty()) {
        std::cerr << "warning: distortion coefficients present but ignored "
                     "(pinhole model)\n";
    }
}

CameraCalib CameraCalib::identity(double fx, double fy, double cx, double cy,
                                  ImageDims dims) {
    CameraCalib c;
    c.intrinsics = {fx, fy, cx, cy};
    c.extrinsics.rotation = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    c.extrinsics.translation = {0, 0, 0};
    c.dims = dims;
    return c;
}

CameraCalib CameraCalib::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("CameraCalib: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("CameraCalib: bad calibration file: " + std::string(e.what()));
    }
    CameraCalib c;
    try {
        c.intrinsics.fx = j.at("fx").get<double>();
        c.intrinsics.fy = j.at("fy").get<double>();
        c.intrinsics.cx = j.at("cx").get<double>();
        c.intrinsics.cy = j.at("cy").get<double>();
        c.dims.width = j.at("width").get<std::size_t>();
        c.dims.height = j.at("height").get<std::size_t>();
        const auto& rot = j.at("R");
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) c.extrinsics.rotation[i][k] = rot.at(i).at(k);
        const auto& t = j.at("t");
        for (int i = 0; i < 3; ++i) c.extrinsics.translation[i] = t.at(i);
        if (j.contains("distortion")) {
            c.distortion = j.at("distortion").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("CameraCalib: missing or malformed field: " +
                              std::string(e.what()));
    }
    c.validate();
    return c;
}

void CameraCalib::save(const std::string& path) const {
    nlohmann::json j;
    j["fx"] = intrinsics.fx;
    j["fy"] = intrinsics.fy;
    j["cx"] = intrinsics.cx;
    j["cy"] = intrinsics.cy;
    j["width"] = dims.width;
    j["height"] = dims.height;
    j["R"] = extrinsics.rotation;
    j["t"] = extrinsics.translation;
    if (!distortion.empty()) j["distortion"] = distortion;
    std::ofstream out(path);
    if (!out) throw IoError("CameraCalib: cannot write " + path);
    out << j.dump(2) << "\n";
}

std::optional<Projection> try_project_point(const std::array<double, 3>& p_world,
                                            const CameraCalib& calib) {
    const Mat3& r = calib.extrinsics.rotation;
    const auto& t = calib.extrinsics.translation;
    const std::array<double, 3> p_cam = {dot3(r[0], p_world) + t[0],
                                         dot3(r[1], p_world) + t[1],
                                         dot3(r[2], p_world) + t[2]};
    if (!(p_cam[2] > 0.0)) return std::nullopt;
    Projection proj;
    proj.z = p_cam[2];
    proj.u = calib.intrinsics.fx * p_cam[0] / p_cam[2] + calib.intrinsics.cx;
    proj.v = calib.intrinsics.fy * p_cam[1] / p_cam[2] + calib.intrinsics.cy;
    return proj;
}

Projection project_point(const std::array<double, 3>& p_world,
                         const CameraCalib& calib) {
    const auto proj = try_project_point(p_world, calib);
    if (!proj) throw BehindCamera("project_point: point behind camera plane");
    return *proj;
}

Rect roi_rect(double center_u, double center_v, std::size_t crop, ImageDims dims) {
    if (crop > dims.width || crop > dims.height) {
        throw InvalidArgument("roi_rect: crop larger than image");
    }
    const auto clamp_axis = [crop](double center, std::size_t extent) {
        const std::int64_t half = static_cast<std::int64_t>(crop) / 2;
        std::int64_t lo = std::llround(center) - half;
        const std::int64_t max_lo =
            static_cast<std::int64_t>(extent) - static_cast<std::int64_t>(crop);
        lo = std::clamp<std::int64_t>(lo, 0, max_lo);
        return lo;
    };
    Rect rect;
    rect.x0 = clamp_axis(center_u, dims.width);
    rect.y0 = clamp_axis(center_v, dims.height);
    rect.x1 = rect.x0 + static_cast<std::int64_t>(crop);
    rect.y1 = rect.y0 + static_cast<std::int64_t>(crop);
    return rect;
}

RoiConfidence roi_confidence(const std::optional<Projection>& proj, ImageDims dims,
                             double occlusion_hint, std::size_t crop,
                             double threshold) {
    occlusion_hint = std::clamp(occlusion_hint, 0.0, 1.0);
    RoiConfidence out;
    if (!proj) {
        out.confidence = 0.0;
        out.fallback = true;
        return out;
    }
    // Distance from the projected center to the nearest image edge, scaled
    // by the crop half-size: 1 when a centered crop fits entirely.
    const double margin =
        std::min(std::min(proj->u, static_cast<double>(dims.width) - proj->u),
                 std::min(proj->v, static_cast<double>(dims.height) - proj->v));
    const double margin_factor =
        std::clamp(margin / (static_cast<double>(crop) / 2.0), 0.0, 1.0);
    const double depth_validity = proj->z > 0.0 ? 1.0 : 0.0;
    out.confidence = margin_factor * depth_validity * (1.0 - occlusion_hint);
    out.fallback = out.confidence < threshold;
    return out;
}

RoiCrop make_roi(const std::array<double, 3>& effector_world, RoiSide side,
                 const CameraCalib& calib, double occlusion_hint, std::size_t crop) {
    RoiCrop out;
    out.side = side;
    out.crop_size = crop;
    const auto proj = try_project_point(effector_world, calib);
    const RoiConfidence conf = roi_confidence(proj, calib.dims, occlusion_hint, crop);
    out.confidence = conf.confidence;
    out.fallback = conf.fallback;
    if (proj) {
        out.center_u = proj->u;
        out.center_v = proj->v;
    } else {
        // No projection: park the crop at the image center for the fallback.
        out.center_u = static_cast<double>(calib.dims.width) / 2.0;
        out.center_v = static_cast<double>(calib.dims.height) / 2.0;
    }
    out.rect = roi_rect(out.center_u, out.center_v, crop, calib.dims);
    return out;
}

}  // namespace saivla
