#pragma once

#include <cstdint>
#include <unordered_map>
#include <unordered_set>

#include "recon/core.hpp"

namespace recon {

struct VoxelKey {
    int64_t i = 0, j = 0, k = 0;
    bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
    size_t operator()(const VoxelKey& k) const {
        // 64-bit mix of the three coordinates (splitmix-style).
        uint64_t h = 0x9e3779b97f4a7c15ull;
        for (uint64_t v : {uint64_t(k.i), uint64_t(k.j), uint64_t(k.k)}) {
            h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            h *= 0xbf58476d1ce4e5b9ull;
            h ^= h >> 31;
        }
        return size_t(h);
    }
};

// Sparse occupancy envelope over a regular grid. Cells follow the half-open
// convention [lo, lo + s) per axis.
struct SparseVoxelGrid {
    Vec3 origin;
    Real voxel_size = 1.0;
    std::unordered_set<VoxelKey, VoxelKeyHash> occupied;

    VoxelKey key_of(const Vec3& p) const {
        return {int64_t(std::floor((p.x - origin.x) / voxel_size)),
                int64_t(std::floor((p.y - origin.y) / voxel_size)),
                int64_t(std::floor((p.z - origin.z) / voxel_size))};
    }
    Vec3 cell_min(const VoxelKey& k) const {
        return origin + Vec3{Real(k.i), Real(k.j), Real(k.k)} * voxel_size;
    }
    Vec3 cell_center(const VoxelKey& k) const {
        return cell_min(k) + Vec3{0.5, 0.5, 0.5} * voxel_size;
    }
    Aabb cell_bounds(const VoxelKey& k) const {
        Vec3 lo = cell_min(k);
        return {lo, lo + Vec3{1, 1, 1} * voxel_size};
    }
    bool contains(const Vec3& p) const { return occupied.count(key_of(p)) > 0; }
    bool empty() const { return occupied.empty(); }

    // Tight bounds of the occupied cells (invalid Aabb when empty).
    Aabb occupied_bounds() const;
};

// Octree over a cubic root, materialized only where the source grid is
// occupied. Leaves live at depth `depth`; leaf edge = root edge / 2^depth
// exactly. Leaf payloads cache SDF values for the sampling module.
class Octree {
public:
    struct Leaf {
        Vec3 center;
        Real sdf = 0;
        int64_t stamp = -1;
        bool set = false;
    };

    Octree() = default;
    Octree(const Aabb& root_bounds, int depth);

    const Aabb& root_bounds() const { return root_bounds_; }
    int depth() const { return depth_; }
    Real leaf_edge() const { return leaf_edge_; }
    size_t leaf_count() const { return leaves_.size(); }

    // Creates the leaf at integer coords (i,j,k) in [0, 2^depth)^3 along with
    // any missing interior nodes; returns its index.
    uint32_t materialize_leaf(int64_t i, int64_t j, int64_t k);

    // Descends from the root; nullopt when p lies outside all materialized
    // leaves. Cost O(depth).
    std::optional<uint32_t> leaf_at(const Vec3& p) const;

    Leaf& leaf(uint32_t idx) { return leaves_[idx]; }
    const Leaf& leaf(uint32_t idx) const { return leaves_[idx]; }
    std::vector<Leaf>& leaves() { return leaves_; }
    const std::vector<Leaf>& leaves() const { return leaves_; }

    // Visits materialized leaves pierced by the ray in ascending t order,
    // passing (leaf index, t_enter, t_exit). Stops early when the visitor
    // returns false.
    void walk_ray(const Ray& ray,
                  const std::function<bool(uint32_t, Real, Real)>& visit) const;

private:
    struct Node {
        std::array<int32_t, 8> child{-1, -1, -1, -1, -1, -1, -1, -1};
    };

    Aabb root_bounds_;
    int depth_ = 0;
    Real leaf_edge_ = 0;
    std::vector<Node> nodes_;    // internal levels 0 .. depth-1; node 0 is root
    std::vector<Leaf> leaves_;   // children at level depth-1 index into this

    void walk_node(int level, int32_t idx, const Vec3& lo, Real edge, const Ray& ray,
                   Real t0, Real t1, bool& keep_going,
                   const std::function<bool(uint32_t, Real, Real)>& visit) const;
};

// Slab test. Returns raw (t_in, t_out) with t_in <= t_out and t_out >= 0;
// t_in may be negative when the origin is inside the box.
std::optional<std::pair<Real, Real>> ray_aabb_intersect(const Ray& ray, const Aabb& box);

// Bins each point into its containing cell; half-open boundaries.
SparseVoxelGrid voxelize_points(std::span<const Vec3> points, Real voxel_size,
                                const Vec3& origin = {});

// Morphological dilation with the (2r+1)^3 cube structuring element.
SparseVoxelGrid dilate(const SparseVoxelGrid& grid, int radius);

// First-entry / last-exit parameters over the occupied cells pierced by the
// ray (one interval, possibly spanning interior gaps). DDA traversal.
std::optional<std::pair<Real, Real>> ray_grid_intersect(const Ray& ray,
                                                        const SparseVoxelGrid& grid);

// Octree whose root is the tight cube around the grid extent, padded to a
// power-of-two voxel multiple. Materializes exactly the depth-l cells that
// intersect an occupied voxel. Throws DataError on an empty grid.
Octree build_octree(const SparseVoxelGrid& grid, int depth);

}  // namespace recon
