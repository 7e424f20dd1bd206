#pragma once

#include "recon/core.hpp"
#include "recon/geometry.hpp"

namespace recon {

enum SampleStage : int {
    kStageVoxel = 0,
    kStageSurface = 1,
    kStageImportance = 2,
    kStageSphere = 3,  // sphere-baseline strategy only; never emitted by hybrid
};

enum class Strategy { Sphere, Voxel, Hybrid };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct SamplingConfig {
    Strategy strategy = Strategy::Hybrid;
    int n_v = 8;
    int n_s = 8;
    Real t_s = 0.05;
    bool jitter = true;           // off -> deterministic bin centers
    Vec3 sphere_center{};
    Real sphere_radius = 1.0;
    Real importance_sharpness = 64.0;
    Real merge_eps = 1e-9;        // 1e-7 * scene extent

    int samples_per_ray() const { return n_v + 2 * n_s; }
};

struct RaySamples {
    Ray ray;
    std::vector<Real> t;      // ascending, >= 0
    std::vector<int> stage;   // SampleStage per sample

    size_t size() const { return t.size(); }
    bool empty() const { return t.empty(); }
};

// Octree of cached SDF predictions over V_sfm, refreshed periodically from
// the field so surface queries stay close to the current zero level set.
struct SdfCache {
    Octree octree;
    int refresh_period = 2000;
    int64_t last_refresh = -1;

    bool ready() const { return last_refresh >= 0; }
    bool due(int64_t iteration) const {
        return last_refresh < 0 || iteration - last_refresh >= refresh_period;
    }
};

// Stratified samples along the chord through the bounding sphere.
RaySamples sphere_sample(const Ray& ray, int n, Real radius, const Vec3& center,
                         Rng* rng);

// Stratified samples between the first-entry and last-exit intersections of
// the ray with the occupied voxels.
RaySamples voxel_guided_sample(const Ray& ray, const SparseVoxelGrid& grid, int n_v,
                               Rng* rng);

// Linear-interpolated zero crossing of the first +/- sign change between
// consecutive cached leaf readings along the ray.
std::optional<Real> query_surface(const SdfCache& cache, const Ray& ray);

// n_s stratified samples in [max(t_hat - t_s, 0), t_hat + t_s].
RaySamples surface_guided_sample(const Ray& ray, Real t_hat, Real t_s, int n_s,
                                 Rng* rng);

// Inverse-CDF draws from a piecewise-constant pdf proportional to the
// renderer's section weights at the given SDF values; uniform fallback when
// every weight vanishes. New samples are merged into the existing set.
RaySamples importance_sample(const Ray& ray, const RaySamples& existing,
                             std::span<const Real> sdf_at_existing, int n_s,
                             Real sharpness, Rng* rng);

// voxel stage + surface stage (voxel-guided substitute on cache miss) +
// importance stage; exactly n_v + 2*n_s samples, ascending.
RaySamples hybrid_sample(const Ray& ray, const SparseVoxelGrid& grid,
                         const SdfCache& cache, const SamplingConfig& cfg, Rng* rng);

struct PruneResult {
    std::vector<uint32_t> kept;  // indices into the input span
    Real kept_fraction = 0;
};

// Keeps rays that intersect the grid, plus declared sky rays.
PruneResult prune_rays(std::span<const Ray> rays, const SparseVoxelGrid& grid,
                       std::span<const uint8_t> sky_flags = {});

// Re-evaluates every materialized leaf center; stamps with the iteration.
void refresh_cache(SdfCache& cache, const SdfBatchFn& sdf, int64_t iteration);

}  // namespace recon
