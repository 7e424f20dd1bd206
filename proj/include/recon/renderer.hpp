#pragma once

#include <Eigen/Dense>

#include "recon/core.hpp"

namespace recon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Sharpness of the SDF-to-density conversion, exp-reparameterized so the
// trained scalar is unconstrained while sigma_inv stays positive.
struct LogisticDensity {
    Real rho = 0;

    Real sigma_inv() const { return std::exp(rho); }
    static LogisticDensity from_sigma_inv(Real s) { return {std::log(s)}; }
};

// 1 / (1 + exp(-sigma_inv * x)), stable for |sigma_inv * x| up to ~500.
Real logistic_cdf(Real x, Real sigma_inv);

// Discrete occlusion-aware alphas from SDF samples d_0..d_n at ascending t:
// alpha_i = clamp((Phi(d_{i-1}) - Phi(d_i)) / Phi(d_{i-1}), 0, 1).
Vec alphas_from_sdf(const Vec& sdf, Real sigma_inv);
void alphas_backward(const Vec& sdf, Real sigma_inv, const Vec& alpha_bar, Vec& sdf_bar,
                     Real& sigma_inv_bar);

struct RenderOutput {
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    Real depth = 0;
    Real opacity = 0;
    Vec weights;
};

// w_i = alpha_i * prod_{j<i} (1 - alpha_j); color/depth/opacity are
// weight-sums over the per-section colors and t midpoints.
RenderOutput composite(const Vec& alphas, const Mat& section_colors, const Vec& t_mid);

// Debug CSV of one ray's (t, d, alpha, w) profile for plotting.
void dump_ray_profile(const std::string& path, const Vec& t, const Vec& sdf,
                      const Vec& alphas, const Vec& weights);

void composite_backward(const Vec& alphas, const Mat& section_colors, const Vec& t_mid,
                        const Eigen::Vector3d& color_bar, Real depth_bar, Real opacity_bar,
                        Vec& alpha_bar, Mat& colors_bar);

}  // namespace recon
