#include "recon/bench.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "recon/geometry.hpp"
#include "recon/kdtree.hpp"

namespace recon {

namespace {

RigidTransform svd_fit(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
    const size_t n = src.size();
    for (size_t i = 0; i < n; ++i) {
        cs += Eigen::Vector3d(src[i].x, src[i].y, src[i].z);
        cd += Eigen::Vector3d(dst[i].x, dst[i].y, dst[i].z);
    }
    cs /= Real(n);
    cd /= Real(n);
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (size_t i = 0; i < n; ++i)
        h += (Eigen::Vector3d(src[i].x, src[i].y, src[i].z) - cs) *
             (Eigen::Vector3d(dst[i].x, dst[i].y, dst[i].z) - cd).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
    if (r.determinant() < 0) {
        Eigen::Matrix3d v = svd.matrixV();
        v.col(2) *= -1;
        r = v * svd.matrixU().transpose();
    }
    RigidTransform t;
    t.rotation = r;
    t.translation = cd - r * cs;
    return t;
}

}  // namespace

IcpResult icp_align(std::span<const Vec3> source, std::span<const Vec3> target,
                    const IcpParams& params) {
    if (source.empty() || target.empty()) throw DataError("icp: empty point cloud");
    KdTree tree(std::vector<Vec3>(target.begin(), target.end()));

    IcpResult result;
    std::vector<Vec3> current(source.begin(), source.end());
    Real prev_rmse = std::numeric_limits<Real>::max();

    auto correspondences = [&](const std::vector<Vec3>& pts, std::vector<Vec3>& src_out,
                               std::vector<Vec3>& dst_out) {
        std::vector<Real> d2(pts.size());
        std::vector<uint32_t> nn(pts.size());
        for (size_t i = 0; i < pts.size(); ++i) {
            auto [idx, dd] = tree.nearest(pts[i]);
            nn[i] = idx;
            d2[i] = dd;
        }
        Real cutoff = params.correspondence_cutoff;
        if (cutoff <= 0) {
            std::vector<Real> tmp = d2;
            std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
            cutoff = 5.0 * std::sqrt(tmp[tmp.size() / 2]);
        }
        Real c2 = cutoff * cutoff;
        src_out.clear();
        dst_out.clear();
        Real sum = 0;
        for (size_t i = 0; i < pts.size(); ++i) {
            if (d2[i] > c2) continue;
            src_out.push_back(pts[i]);
            dst_out.push_back(tree.point(nn[i]));
            sum += d2[i];
        }
        return src_out.empty() ? 0.0 : std::sqrt(sum / Real(src_out.size()));
    };

    std::vector<Vec3> src_in, dst_in;
    for (int it = 0; it < params.max_iterations; ++it) {
        Real rmse = correspondences(current, src_in, dst_in);
        if (src_in.size() < 3)
            throw NumericalError("icp: fewer than 3 correspondences at iteration " +
                                 std::to_string(it));
        result.iterations = it + 1;
        if (std::abs(prev_rmse - rmse) < params.convergence_eps) break;
        prev_rmse = rmse;

        RigidTransform delta = svd_fit(src_in, dst_in);
        for (auto& p : current) p = delta.apply(p);
        result.transform.rotation = delta.rotation * result.transform.rotation;
        result.transform.translation =
            delta.rotation * result.transform.translation + delta.translation;
    }
    result.rmse = correspondences(current, src_in, dst_in);
    return result;
}

std::vector<Vec3> visibility_filter(std::span<const Vec3> reference,
                                    std::span<const Vec3> candidates, Real voxel_size,
                                    int dilation_radius) {
    SparseVoxelGrid grid = dilate(voxelize_points(reference, voxel_size), dilation_radius);
    std::vector<Vec3> kept;
    kept.reserve(candidates.size());
    for (const auto& p : candidates)
        if (grid.contains(p)) kept.push_back(p);
    return kept;
}

namespace {

std::vector<Real> nn_distances(std::span<const Vec3> from, const KdTree& to) {
    std::vector<Real> d(from.size());
    for (size_t i = 0; i < from.size(); ++i) d[i] = std::sqrt(to.nearest(from[i]).second);
    return d;
}

Real percent_within(const std::vector<Real>& d, Real tau) {
    size_t n = 0;
    for (Real v : d) n += v <= tau;
    return 100.0 * Real(n) / Real(d.size());
}

Real f1_of(Real p, Real r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

Prf precision_recall_f1(std::span<const Vec3> pred, std::span<const Vec3> gt, Real tau) {
    if (pred.empty() || gt.empty()) throw DataError("precision_recall_f1: empty cloud");
    if (!(tau > 0)) throw DataError("precision_recall_f1: tau must be > 0");
    KdTree gt_tree(std::vector<Vec3>(gt.begin(), gt.end()));
    KdTree pred_tree(std::vector<Vec3>(pred.begin(), pred.end()));
    Prf out;
    out.precision = percent_within(nn_distances(pred, gt_tree), tau);
    out.recall = percent_within(nn_distances(gt, pred_tree), tau);
    out.f1 = f1_of(out.precision, out.recall);
    return out;
}

MetricCurve metric_curve(std::span<const Vec3> pred, std::span<const Vec3> gt,
                         std::span<const Real> taus) {
    if (pred.empty() || gt.empty()) throw DataError("metric_curve: empty cloud");
    KdTree gt_tree(std::vector<Vec3>(gt.begin(), gt.end()));
    KdTree pred_tree(std::vector<Vec3>(pred.begin(), pred.end()));
    std::vector<Real> dp = nn_distances(pred, gt_tree);
    std::vector<Real> dg = nn_distances(gt, pred_tree);
    MetricCurve curve;
    curve.tau.assign(taus.begin(), taus.end());
    for (Real tau : taus) {
        Real p = percent_within(dp, tau);
        Real r = percent_within(dg, tau);
        curve.precision.push_back(p);
        curve.recall.push_back(r);
        curve.f1.push_back(f1_of(p, r));
    }
    return curve;
}

ThresholdSet select_thresholds(const MetricCurve& curve) {
    for (size_t i = 0; i < curve.tau.size(); ++i) {
        if (curve.f1[i] >= 80.0) {
            ThresholdSet t;
            t.theta_max = curve.tau[i];
            t.low = 0.25 * t.theta_max;
            t.medium = 0.5 * t.theta_max;
            t.high = 0.75 * t.theta_max;
            return t;
        }
    }
    throw DataError(
        "select_thresholds: F1 never reaches 80 on the ladder; rerun with a larger "
        "ladder_max");
}

namespace {

Real trapezoid(std::span<const Real> taus, std::span<const Real> values, Real theta_max) {
    if (taus.size() < 2 || taus.size() != values.size())
        throw DataError("auc: need >= 2 rungs");
    if (taus.front() > 1e-12 || taus.back() < theta_max - 1e-12)
        throw DataError("auc: ladder must cover [0, theta_max]");
    Real integral = 0;
    for (size_t i = 1; i < taus.size(); ++i) {
        Real a = taus[i - 1], b = taus[i];
        if (a >= theta_max) break;
        Real va = values[i - 1], vb = values[i];
        if (b > theta_max) {  // clip the last segment at theta_max
            vb = va + (vb - va) * (theta_max - a) / (b - a);
            b = theta_max;
        }
        integral += 0.5 * (va + vb) * (b - a);
    }
    return integral;
}

}  // namespace

Real auc(std::span<const Real> taus, std::span<const Real> values, Real theta_max) {
    return trapezoid(taus, values, theta_max) / theta_max;
}

Real auc_raw(std::span<const Real> taus, std::span<const Real> values, Real theta_max) {
    return trapezoid(taus, values, theta_max);
}

size_t early_checkpoint(std::span<const Real> f1_per_checkpoint) {
    if (f1_per_checkpoint.empty()) throw DataError("early_checkpoint: no checkpoints");
    Real target = 0.95 * f1_per_checkpoint.back();
    for (size_t i = 0; i < f1_per_checkpoint.size(); ++i)
        if (f1_per_checkpoint[i] >= target) return i;
    return f1_per_checkpoint.size() - 1;
}

EvalReport evaluate_reconstruction(std::span<const Vec3> pred, std::span<const Vec3> gt,
                                   const EvalParams& params) {
    Real hi = params.ladder_max;
    if (hi <= 0) {
        Aabb box;
        for (const auto& p : gt) box.expand(p);
        hi = 0.5 * box.extent().norm();
    }
    std::vector<Real> taus(size_t(params.ladder_steps));
    for (int i = 0; i < params.ladder_steps; ++i)
        taus[size_t(i)] = hi * Real(i) / Real(params.ladder_steps - 1);

    EvalReport rep;
    rep.curve = metric_curve(pred, gt, taus);
    rep.thresholds = select_thresholds(rep.curve);
    rep.at_low = precision_recall_f1(pred, gt, rep.thresholds.low);
    rep.at_medium = precision_recall_f1(pred, gt, rep.thresholds.medium);
    rep.at_high = precision_recall_f1(pred, gt, rep.thresholds.high);
    Real tm = rep.thresholds.theta_max;
    rep.auc_p = auc(rep.curve.tau, rep.curve.precision, tm);
    rep.auc_r = auc(rep.curve.tau, rep.curve.recall, tm);
    rep.auc_f1 = auc(rep.curve.tau, rep.curve.f1, tm);
    rep.raw_auc_p = auc_raw(rep.curve.tau, rep.curve.precision, tm);
    rep.raw_auc_r = auc_raw(rep.curve.tau, rep.curve.recall, tm);
    rep.raw_auc_f1 = auc_raw(rep.curve.tau, rep.curve.f1, tm);
    return rep;
}

std::string report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["thresholds"] = {{"theta_max", rep.thresholds.theta_max},
                       {"low", rep.thresholds.low},
                       {"medium", rep.thresholds.medium},
                       {"high", rep.thresholds.high}};
    auto prf = [](const Prf& v) {
        return nlohmann::json{{"precision", v.precision}, {"recall", v.recall}, {"f1", v.f1}};
    };
    j["low"] = prf(rep.at_low);
    j["medium"] = prf(rep.at_medium);
    j["high"] = prf(rep.at_high);
    j["auc"] = {{"precision", rep.auc_p}, {"recall", rep.auc_r}, {"f1", rep.auc_f1}};
    j["auc_raw"] = {{"precision", rep.raw_auc_p},
                    {"recall", rep.raw_auc_r},
                    {"f1", rep.raw_auc_f1}};
    j["curve"] = {{"tau", rep.curve.tau},
                  {"precision", rep.curve.precision},
                  {"recall", rep.curve.recall},
                  {"f1", rep.curve.f1}};
    return j.dump(2);
}

std::string report_table(const EvalReport& rep) {
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof(line), "%-18s %8s %8s %8s\n", "threshold", "P", "R", "F1");
    out << line;
    auto row = [&](const char* name, Real tau, const Prf& v) {
        std::snprintf(line, sizeof(line), "%-8s (%7.4f) %8.1f %8.1f %8.1f\n", name, tau,
                      v.precision, v.recall, v.f1);
        out << line;
    };
    row("Low", rep.thresholds.low, rep.at_low);
    row("Medium", rep.thresholds.medium, rep.at_medium);
    row("High", rep.thresholds.high, rep.at_high);
    std::snprintf(line, sizeof(line), "%-18s %8.1f %8.1f %8.1f\n", "All (AUC)", rep.auc_p,
                  rep.auc_r, rep.auc_f1);
    out << line;
    std::snprintf(line, sizeof(line), "theta_max = %.6g\n", rep.thresholds.theta_max);
    out << line;
    return out.str();
}

}  // namespace recon
