#include "recon/sampling.hpp"

#include <algorithm>

#include "recon/renderer.hpp"

namespace recon {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Sphere: return "sphere";
        case Strategy::Voxel: return "voxel";
        case Strategy::Hybrid: return "hybrid";
    }
    return "?";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "sphere") return Strategy::Sphere;
    if (name == "voxel") return Strategy::Voxel;
    if (name == "hybrid") return Strategy::Hybrid;
    throw UsageError("unknown strategy '" + name + "'");
}

namespace {

void stratified(Real t0, Real t1, int n, int stage, Rng* rng, RaySamples& out) {
    std::uniform_real_distribution<Real> u01(0.0, 1.0);
    Real span = t1 - t0;
    for (int i = 0; i < n; ++i) {
        Real u = rng ? u01(*rng) : 0.5;
        out.t.push_back(t0 + (i + u) * span / n);
        out.stage.push_back(stage);
    }
}

void sort_and_separate(RaySamples& s, Real eps) {
    std::vector<size_t> order(s.t.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return s.t[a] < s.t[b]; });
    std::vector<Real> t(s.t.size());
    std::vector<int> stage(s.t.size());
    for (size_t i = 0; i < order.size(); ++i) {
        t[i] = s.t[order[i]];
        stage[i] = s.stage[order[i]];
    }
    // near-duplicates are nudged forward so the per-ray count stays fixed
    for (size_t i = 1; i < t.size(); ++i)
        if (t[i] < t[i - 1] + eps) t[i] = t[i - 1] + eps;
    s.t = std::move(t);
    s.stage = std::move(stage);
}

}  // namespace

RaySamples sphere_sample(const Ray& ray, int n, Real radius, const Vec3& center,
                         Rng* rng) {
    RaySamples out;
    out.ray = ray;
    Vec3 oc = ray.origin - center;
    Real b = oc.dot(ray.direction);
    Real c = oc.squared_norm() - radius * radius;
    Real disc = b * b - c;
    if (disc < 0) return out;
    Real sq = std::sqrt(disc);
    Real t0 = -b - sq, t1 = -b + sq;
    if (t1 < 0) return out;
    t0 = std::max(t0, Real(0));
    stratified(t0, t1, n, kStageSphere, rng, out);
    return out;
}

RaySamples voxel_guided_sample(const Ray& ray, const SparseVoxelGrid& grid, int n_v,
                               Rng* rng) {
    RaySamples out;
    out.ray = ray;
    auto hit = ray_grid_intersect(ray, grid);
    if (!hit) return out;
    stratified(std::max(hit->first, Real(0)), hit->second, n_v, kStageVoxel, rng, out);
    return out;
}

std::optional<Real> query_surface(const SdfCache& cache, const Ray& ray) {
    if (!cache.ready()) return std::nullopt;
    std::optional<Real> crossing;
    Real prev_t = 0, prev_d = 0;
    bool have_prev = false;
    cache.octree.walk_ray(ray, [&](uint32_t leaf_idx, Real tin, Real tout) {
        const auto& leaf = cache.octree.leaf(leaf_idx);
        if (!leaf.set) return true;
        Real t_mid = 0.5 * (std::max(tin, Real(0)) + tout);
        if (have_prev && prev_d > 0 && leaf.sdf < 0) {
            crossing = prev_t + (t_mid - prev_t) * prev_d / (prev_d - leaf.sdf);
            return false;
        }
        prev_t = t_mid;
        prev_d = leaf.sdf;
        have_prev = true;
        return true;
    });
    return crossing;
}

RaySamples surface_guided_sample(const Ray& ray, Real t_hat, Real t_s, int n_s,
                                 Rng* rng) {
    RaySamples out;
    out.ray = ray;
    stratified(std::max(t_hat - t_s, Real(0)), t_hat + t_s, n_s, kStageSurface, rng, out);
    return out;
}

RaySamples importance_sample(const Ray& ray, const RaySamples& existing,
                             std::span<const Real> sdf_at_existing, int n_s,
                             Real sharpness, Rng* rng) {
    const size_t m = existing.t.size();
    if (m < 2) throw DataError("importance_sample: need >= 2 existing samples");
    if (sdf_at_existing.size() != m)
        throw DataError("importance_sample: sdf value count mismatch");

    Vec d = Vec::Zero(Eigen::Index(m));
    for (size_t i = 0; i < m; ++i) d(Eigen::Index(i)) = sdf_at_existing[i];
    Vec alpha = alphas_from_sdf(d, sharpness);
    Vec weights = composite(alpha, Mat::Zero(3, alpha.size()), Vec::Zero(alpha.size()))
                      .weights;

    Real total = weights.sum();
    std::vector<Real> cdf(m, 0.0);
    if (total <= 0) {
        // degenerate weights: uniform pdf over the whole span
        for (size_t i = 1; i < m; ++i)
            cdf[i] = (existing.t[i] - existing.t[0]) /
                     std::max(existing.t[m - 1] - existing.t[0],
                              std::numeric_limits<Real>::min());
    } else {
        for (size_t i = 1; i < m; ++i) cdf[i] = cdf[i - 1] + weights(Eigen::Index(i - 1));
        for (size_t i = 1; i < m; ++i) cdf[i] /= total;
    }
    cdf[m - 1] = 1.0;

    RaySamples out;
    out.ray = ray;
    out.t = existing.t;
    out.stage = existing.stage;
    std::uniform_real_distribution<Real> u01(0.0, 1.0);
    for (int j = 0; j < n_s; ++j) {
        Real u = (j + (rng ? u01(*rng) : 0.5)) / n_s;
        auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
        size_t hi = std::min(size_t(it - cdf.begin()), m - 1);
        size_t lo = hi - 1;
        Real mass = cdf[hi] - cdf[lo];
        Real frac = mass > 0 ? (u - cdf[lo]) / mass : 0.5;
        out.t.push_back(existing.t[lo] + frac * (existing.t[hi] - existing.t[lo]));
        out.stage.push_back(kStageImportance);
    }
    return out;
}

RaySamples hybrid_sample(const Ray& ray, const SparseVoxelGrid& grid,
                         const SdfCache& cache, const SamplingConfig& cfg, Rng* rng) {
    RaySamples samples = voxel_guided_sample(ray, grid, cfg.n_v, rng);
    if (samples.empty()) return samples;  // pruned ray, nothing to do
    Real t_lo = samples.t.front(), t_hi = samples.t.back();

    auto t_hat = query_surface(cache, ray);
    if (t_hat) {
        RaySamples surf = surface_guided_sample(ray, *t_hat, cfg.t_s, cfg.n_s, rng);
        samples.t.insert(samples.t.end(), surf.t.begin(), surf.t.end());
        samples.stage.insert(samples.stage.end(), surf.stage.begin(), surf.stage.end());
    } else {
        // cache miss: a second voxel-guided stratum keeps the count constant
        stratified(t_lo, t_hi, cfg.n_s, kStageVoxel, rng, samples);
    }
    sort_and_separate(samples, cfg.merge_eps);

    // SDF readings for the importance pdf come from the cache
    std::vector<Real> sdf(samples.t.size(), 0.0);
    std::vector<uint8_t> valid(samples.t.size(), 0);
    bool any_valid = false;
    for (size_t i = 0; i < samples.t.size(); ++i) {
        auto leaf = cache.octree.leaf_at(ray.at(samples.t[i]));
        if (leaf && cache.octree.leaf(*leaf).set) {
            sdf[i] = cache.octree.leaf(*leaf).sdf;
            valid[i] = 1;
            any_valid = true;
        }
    }
    if (any_valid) {
        // fill gaps with the nearest valid reading along the ray
        int last = -1;
        for (size_t i = 0; i < sdf.size(); ++i) {
            if (valid[i]) { last = int(i); continue; }
            int next = -1;
            for (size_t j = i + 1; j < sdf.size(); ++j)
                if (valid[j]) { next = int(j); break; }
            if (last >= 0 && next >= 0)
                sdf[i] = (samples.t[i] - samples.t[last] <
                          samples.t[next] - samples.t[i])
                             ? sdf[last]
                             : sdf[next];
            else if (last >= 0) sdf[i] = sdf[last];
            else if (next >= 0) sdf[i] = sdf[next];
        }
    }
    // all-invalid leaves every reading at zero; the importance stage then
    // degrades to its uniform fallback

    samples = importance_sample(ray, samples, sdf, cfg.n_s, cfg.importance_sharpness, rng);
    sort_and_separate(samples, cfg.merge_eps);
    return samples;
}

PruneResult prune_rays(std::span<const Ray> rays, const SparseVoxelGrid& grid,
                       std::span<const uint8_t> sky_flags) {
    PruneResult out;
    out.kept.reserve(rays.size());
    for (size_t i = 0; i < rays.size(); ++i) {
        bool sky = i < sky_flags.size() && sky_flags[i] != 0;
        if (sky || ray_grid_intersect(rays[i], grid))
            out.kept.push_back(uint32_t(i));
    }
    out.kept_fraction = rays.empty() ? 0.0 : Real(out.kept.size()) / Real(rays.size());
    return out;
}

void refresh_cache(SdfCache& cache, const SdfBatchFn& sdf, int64_t iteration) {
    auto& leaves = cache.octree.leaves();
    std::vector<Vec3> centers(leaves.size());
    for (size_t i = 0; i < leaves.size(); ++i) centers[i] = leaves[i].center;
    std::vector<Real> values(leaves.size());
    sdf(centers, values);
    for (size_t i = 0; i < leaves.size(); ++i) {
        leaves[i].sdf = values[i];
        leaves[i].stamp = iteration;
        leaves[i].set = true;
    }
    cache.last_refresh = iteration;
}

}  // namespace recon
