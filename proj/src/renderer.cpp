#include "recon/renderer.hpp"

#include <fstream>

namespace recon {

Real logistic_cdf(Real x, Real sigma_inv) {
    Real a = sigma_inv * x;
    return a >= 0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
}

Vec alphas_from_sdf(const Vec& sdf, Real sigma_inv) {
    const Eigen::Index n = sdf.size() - 1;
    if (n < 1) throw DataError("alphas_from_sdf: need at least 2 samples");
    Vec alpha(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Real u = logistic_cdf(sdf(i), sigma_inv);
        Real v = logistic_cdf(sdf(i + 1), sigma_inv);
        alpha(i) = u > 0 ? std::clamp((u - v) / u, 0.0, 1.0) : 0.0;
    }
    return alpha;
}

void alphas_backward(const Vec& sdf, Real sigma_inv, const Vec& alpha_bar, Vec& sdf_bar,
                     Real& sigma_inv_bar) {
    const Eigen::Index n = sdf.size() - 1;
    if (sdf_bar.size() == 0) sdf_bar = Vec::Zero(sdf.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        if (alpha_bar(i) == 0) continue;
        Real u = logistic_cdf(sdf(i), sigma_inv);
        Real v = logistic_cdf(sdf(i + 1), sigma_inv);
        if (u <= 0) continue;
        Real raw = (u - v) / u;
        if (raw <= 0 || raw >= 1) continue;  // clamp active (or saturated)
        Real du = sigma_inv * u * (1.0 - u);
        Real dv = sigma_inv * v * (1.0 - v);
        Real d_raw_du = v / (u * u);
        Real d_raw_dv = -1.0 / u;
        sdf_bar(i) += alpha_bar(i) * d_raw_du * du;
        sdf_bar(i + 1) += alpha_bar(i) * d_raw_dv * dv;
        sigma_inv_bar += alpha_bar(i) * (d_raw_du * sdf(i) * u * (1.0 - u) +
                                         d_raw_dv * sdf(i + 1) * v * (1.0 - v));
    }
}

RenderOutput composite(const Vec& alphas, const Mat& section_colors, const Vec& t_mid) {
    const Eigen::Index n = alphas.size();
    if (section_colors.cols() != n || t_mid.size() != n)
        throw DataError("composite: length mismatch");
    RenderOutput out;
    out.weights.resize(n);
    Real trans = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Real w = alphas(i) * trans;
        out.weights(i) = w;
        out.color += w * section_colors.col(i);
        out.depth += w * t_mid(i);
        out.opacity += w;
        trans *= (1.0 - alphas(i));
    }
    return out;
}

void dump_ray_profile(const std::string& path, const Vec& t, const Vec& sdf,
                      const Vec& alphas, const Vec& weights) {
    std::ofstream out(path);
    if (!out) throw DataError("dump_ray_profile: cannot write " + path);
    out << "t,d,alpha,w\n";
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        out << t(i) << ',' << sdf(i) << ',';
        if (i < alphas.size()) out << alphas(i) << ',' << weights(i);
        else out << ',';
        out << '\n';
    }
}

void composite_backward(const Vec& alphas, const Mat& section_colors, const Vec& t_mid,
                        const Eigen::Vector3d& color_bar, Real depth_bar, Real opacity_bar,
                        Vec& alpha_bar, Mat& colors_bar) {
    const Eigen::Index n = alphas.size();
    Vec trans(n);  // T_i before section i
    Real t = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        trans(i) = t;
        t *= (1.0 - alphas(i));
    }
    if (alpha_bar.size() == 0) alpha_bar = Vec::Zero(n);
    if (colors_bar.size() == 0) colors_bar = Mat::Zero(3, n);

    // reverse pass over w_i = alpha_i T_i, T_{i+1} = T_i (1 - alpha_i)
    Real trans_bar = 0.0;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        Real w_bar = color_bar.dot(section_colors.col(i)) + depth_bar * t_mid(i) +
                     opacity_bar;
        Real w = alphas(i) * trans(i);
        colors_bar.col(i) += color_bar * w;
        alpha_bar(i) += w_bar * trans(i) - trans_bar * trans(i);
        trans_bar = w_bar * alphas(i) + trans_bar * (1.0 - alphas(i));
    }
}

}  // namespace recon
