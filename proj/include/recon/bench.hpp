#pragma once

#include <Eigen/Dense>

#include "recon/core.hpp"

namespace recon {

struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    Real scale = 1.0;

    Vec3 apply(const Vec3& p) const {
        Eigen::Vector3d q = scale * (rotation * Eigen::Vector3d(p.x, p.y, p.z)) + translation;
        return {q.x(), q.y(), q.z()};
    }
    std::vector<Vec3> apply(std::span<const Vec3> pts) const {
        std::vector<Vec3> out(pts.size());
        for (size_t i = 0; i < pts.size(); ++i) out[i] = apply(pts[i]);
        return out;
    }
};

struct IcpParams {
    int max_iterations = 50;
    Real correspondence_cutoff = 0;  // <= 0: 5x median NN distance per iteration
    Real convergence_eps = 1e-8;
};

struct IcpResult {
    RigidTransform transform;  // maps source onto target
    Real rmse = 0;
    int iterations = 0;
};

// Point-to-point ICP with closed-form SVD fits; assumes rough pre-alignment.
IcpResult icp_align(std::span<const Vec3> source, std::span<const Vec3> target,
                    const IcpParams& params = {});

// Keeps candidates inside the dilated voxelization of the reference cloud.
std::vector<Vec3> visibility_filter(std::span<const Vec3> reference,
                                    std::span<const Vec3> candidates, Real voxel_size,
                                    int dilation_radius);

struct Prf {
    Real precision = 0, recall = 0, f1 = 0;  // percentages
};

Prf precision_recall_f1(std::span<const Vec3> pred, std::span<const Vec3> gt, Real tau);

struct MetricCurve {
    std::vector<Real> tau;
    std::vector<Real> precision, recall, f1;  // percentages per rung
};

// One nearest-neighbor pass; thresholds swept over the ladder.
MetricCurve metric_curve(std::span<const Vec3> pred, std::span<const Vec3> gt,
                         std::span<const Real> taus);

struct ThresholdSet {
    Real theta_max = 0, low = 0, medium = 0, high = 0;
};

// theta_max = first ladder rung with F1 >= 80; Low/Medium/High are the
// interior quartiles of (0, theta_max).
ThresholdSet select_thresholds(const MetricCurve& curve);

// Trapezoidal integral of (tau, value) over [0, theta_max], normalized by
// theta_max so a constant-100 curve scores 100.
Real auc(std::span<const Real> taus, std::span<const Real> values, Real theta_max);
Real auc_raw(std::span<const Real> taus, std::span<const Real> values, Real theta_max);

// Earliest checkpoint whose score reaches 95% of the final one.
size_t early_checkpoint(std::span<const Real> f1_per_checkpoint);

struct EvalReport {
    ThresholdSet thresholds;
    Prf at_low, at_medium, at_high;
    Real auc_p = 0, auc_r = 0, auc_f1 = 0;              // normalized, percent
    Real raw_auc_p = 0, raw_auc_r = 0, raw_auc_f1 = 0;  // unnormalized integrals
    MetricCurve curve;
};

struct EvalParams {
    Real ladder_max = 0;  // <= 0: derived from the ground-truth extent
    int ladder_steps = 200;
};

EvalReport evaluate_reconstruction(std::span<const Vec3> pred, std::span<const Vec3> gt,
                                   const EvalParams& params = {});

std::string report_to_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace recon
