#pragma once

#include <functional>
#include <string>

#include "recon/core.hpp"
#include "recon/scene_io.hpp"

namespace recon {

// Analytic test shapes with exact SDFs, centered at the origin.
struct AnalyticShape {
    std::function<Real(const Vec3&)> sdf;
    Real bounding_radius = 0.5;
    std::string tag;
};

AnalyticShape make_shape(const std::string& tag);  // sphere | box | two-spheres

Vec3 shape_normal(const AnalyticShape& shape, const Vec3& p);

// Exact surface samples (|p| = radius for the sphere).
std::vector<Vec3> sample_shape_surface(const AnalyticShape& shape, size_t count, Rng& rng);

struct SynthOptions {
    std::string shape = "sphere";
    int n_views = 16;
    int resolution = 64;
    Real tint_strength = 0.2;   // per-image color multiplier spread
    Real sky_fraction = 0.5;    // approximate fraction of sky pixels per view
    uint64_t seed = 1;
    int n_sfm_points = 2000;
    int n_gt_points = 200000;
    std::string out_dir;
};

// Renders Lambertian views of the shape, writes a COLMAP-text scene
// (cameras/images/points3D), per-view images and sky masks, ground-truth
// mesh + point cloud, and a desk-scale config.json.
void synth_scene(const SynthOptions& opts);

// Camera ring used by the generator (exposed for tests).
std::vector<Camera> synth_cameras(const SynthOptions& opts, const AnalyticShape& shape);

void rotation_to_quat(const Real R[3][3], Real& qw, Real& qx, Real& qy, Real& qz);

}  // namespace recon
