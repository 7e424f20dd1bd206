#include "recon/geometry.hpp"

#include <algorithm>
#include <bit>

namespace recon {

Aabb SparseVoxelGrid::occupied_bounds() const {
    Aabb b;
    for (const auto& k : occupied) {
        Vec3 lo = cell_min(k);
        b.expand(lo);
        b.expand(lo + Vec3{1, 1, 1} * voxel_size);
    }
    return b;
}

std::optional<std::pair<Real, Real>> ray_aabb_intersect(const Ray& ray, const Aabb& box) {
    Real t_in = -std::numeric_limits<Real>::infinity();
    Real t_out = std::numeric_limits<Real>::infinity();
    for (int a = 0; a < 3; ++a) {
        Real o = ray.origin[a], d = ray.direction[a];
        if (d == 0) {
            if (o < box.min[a] || o > box.max[a]) return std::nullopt;
            continue;
        }
        Real inv = Real(1) / d;
        Real t0 = (box.min[a] - o) * inv;
        Real t1 = (box.max[a] - o) * inv;
        if (t0 > t1) std::swap(t0, t1);
        t_in = std::max(t_in, t0);
        t_out = std::min(t_out, t1);
        if (t_in > t_out) return std::nullopt;
    }
    if (t_out < 0) return std::nullopt;  // box entirely behind the ray
    return std::make_pair(t_in, t_out);
}

SparseVoxelGrid voxelize_points(std::span<const Vec3> points, Real voxel_size,
                                const Vec3& origin) {
    if (voxel_size <= 0) throw DataError("voxelize_points: voxel_size must be > 0");
    SparseVoxelGrid g;
    g.origin = origin;
    g.voxel_size = voxel_size;
    g.occupied.reserve(points.size());
    for (const auto& p : points) g.occupied.insert(g.key_of(p));
    return g;
}

SparseVoxelGrid dilate(const SparseVoxelGrid& grid, int radius) {
    if (radius < 0) throw DataError("dilate: radius must be >= 0");
    if (radius == 0) return grid;
    SparseVoxelGrid out;
    out.origin = grid.origin;
    out.voxel_size = grid.voxel_size;
    out.occupied.reserve(grid.occupied.size() * (2 * radius + 1));
    for (const auto& k : grid.occupied)
        for (int64_t di = -radius; di <= radius; ++di)
            for (int64_t dj = -radius; dj <= radius; ++dj)
                for (int64_t dk = -radius; dk <= radius; ++dk)
                    out.occupied.insert({k.i + di, k.j + dj, k.k + dk});
    return out;
}

std::optional<std::pair<Real, Real>> ray_grid_intersect(const Ray& ray,
                                                        const SparseVoxelGrid& grid) {
    if (grid.empty()) return std::nullopt;

    // Integer bounds of the occupied region.
    int64_t lo[3] = {INT64_MAX, INT64_MAX, INT64_MAX};
    int64_t hi[3] = {INT64_MIN, INT64_MIN, INT64_MIN};
    for (const auto& k : grid.occupied) {
        int64_t v[3] = {k.i, k.j, k.k};
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], v[a]);
            hi[a] = std::max(hi[a], v[a]);
        }
    }
    const Real s = grid.voxel_size;
    Aabb bbox{grid.origin + Vec3{Real(lo[0]), Real(lo[1]), Real(lo[2])} * s,
              grid.origin + Vec3{Real(hi[0] + 1), Real(hi[1] + 1), Real(hi[2] + 1)} * s};
    auto clip = ray_aabb_intersect(ray, bbox);
    if (!clip) return std::nullopt;
    Real t = std::max(clip->first, Real(0));
    const Real t_end = clip->second;

    // Amanatides-Woo walk from the entry cell.
    Vec3 p0 = ray.at(t);
    int64_t cell[3];
    for (int a = 0; a < 3; ++a) {
        cell[a] = int64_t(std::floor((p0[a] - grid.origin[a]) / s));
        cell[a] = std::clamp(cell[a], lo[a], hi[a]);
    }
    Real t_max[3], t_delta[3];
    int step[3];
    for (int a = 0; a < 3; ++a) {
        Real d = ray.direction[a];
        if (d > 0) {
            step[a] = 1;
            t_max[a] = (grid.origin[a] + Real(cell[a] + 1) * s - ray.origin[a]) / d;
            t_delta[a] = s / d;
        } else if (d < 0) {
            step[a] = -1;
            t_max[a] = (grid.origin[a] + Real(cell[a]) * s - ray.origin[a]) / d;
            t_delta[a] = -s / d;
        } else {
            step[a] = 0;
            t_max[a] = std::numeric_limits<Real>::infinity();
            t_delta[a] = std::numeric_limits<Real>::infinity();
        }
    }

    bool found = false;
    Real first_in = 0, last_out = 0;
    while (true) {
        if (grid.occupied.count({cell[0], cell[1], cell[2]})) {
            // Exact per-cell slab parameters, matching the brute-force oracle.
            auto hit = ray_aabb_intersect(
                ray, grid.cell_bounds({cell[0], cell[1], cell[2]}));
            if (hit) {
                if (!found) first_in = hit->first;
                last_out = std::max(found ? last_out : hit->second, hit->second);
                found = true;
            }
        }
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        if (t_max[axis] > t_end) break;
        cell[axis] += step[axis];
        if (cell[axis] < lo[axis] || cell[axis] > hi[axis]) break;
        t_max[axis] += t_delta[axis];
    }
    if (!found || !(first_in < last_out)) return std::nullopt;
    return std::make_pair(first_in, last_out);
}

Octree::Octree(const Aabb& root_bounds, int depth)
    : root_bounds_(root_bounds), depth_(depth) {
    if (depth < 1) throw DataError("Octree: depth must be >= 1");
    leaf_edge_ = std::ldexp(root_bounds.extent().x, -depth);
    nodes_.emplace_back();
}

uint32_t Octree::materialize_leaf(int64_t i, int64_t j, int64_t k) {
    int32_t node = 0;
    for (int level = 0; level < depth_; ++level) {
        int shift = depth_ - 1 - level;
        int child = int(((i >> shift) & 1) | (((j >> shift) & 1) << 1) |
                        (((k >> shift) & 1) << 2));
        if (level == depth_ - 1) {
            int32_t slot = nodes_[node].child[child];
            if (slot < 0) {
                Vec3 c = root_bounds_.min +
                         Vec3{(Real(i) + 0.5), (Real(j) + 0.5), (Real(k) + 0.5)} * leaf_edge_;
                slot = int32_t(leaves_.size());
                leaves_.push_back(Leaf{c, 0, -1, false});
                nodes_[node].child[child] = slot;
            }
            return uint32_t(slot);
        }
        if (nodes_[node].child[child] < 0) {
            int32_t fresh = int32_t(nodes_.size());
            nodes_.emplace_back();  // may reallocate; write via index afterwards
            nodes_[node].child[child] = fresh;
        }
        node = nodes_[node].child[child];
    }
    return 0;  // unreachable
}

std::optional<uint32_t> Octree::leaf_at(const Vec3& p) const {
    if (!root_bounds_.contains_halfopen(p)) return std::nullopt;
    int64_t n = int64_t(1) << depth_;
    int64_t i = int64_t(std::floor((p.x - root_bounds_.min.x) / leaf_edge_));
    int64_t j = int64_t(std::floor((p.y - root_bounds_.min.y) / leaf_edge_));
    int64_t k = int64_t(std::floor((p.z - root_bounds_.min.z) / leaf_edge_));
    i = std::clamp<int64_t>(i, 0, n - 1);
    j = std::clamp<int64_t>(j, 0, n - 1);
    k = std::clamp<int64_t>(k, 0, n - 1);
    int32_t node = 0;
    for (int level = 0; level < depth_; ++level) {
        int shift = depth_ - 1 - level;
        int child = int(((i >> shift) & 1) | (((j >> shift) & 1) << 1) |
                        (((k >> shift) & 1) << 2));
        int32_t slot = nodes_[node].child[child];
        if (slot < 0) return std::nullopt;
        if (level == depth_ - 1) return uint32_t(slot);
        node = slot;
    }
    return std::nullopt;
}

void Octree::walk_node(int level, int32_t idx, const Vec3& lo, Real edge, const Ray& ray,
                       Real t0, Real t1, bool& keep_going,
                       const std::function<bool(uint32_t, Real, Real)>& visit) const {
    Real half = edge * 0.5;
    struct ChildHit {
        int c;
        Real tin, tout;
    };
    ChildHit hits[8];
    int n_hits = 0;
    for (int c = 0; c < 8; ++c) {
        if (nodes_[idx].child[c] < 0) continue;
        Vec3 clo = lo + Vec3{Real(c & 1), Real((c >> 1) & 1), Real((c >> 2) & 1)} * half;
        auto h = ray_aabb_intersect(ray, Aabb{clo, clo + Vec3{1, 1, 1} * half});
        if (!h) continue;
        Real tin = std::max(h->first, t0);
        Real tout = std::min(h->second, t1);
        if (tin > tout) continue;
        hits[n_hits++] = {c, h->first, h->second};
    }
    std::sort(hits, hits + n_hits,
              [](const ChildHit& a, const ChildHit& b) { return a.tin < b.tin; });
    for (int m = 0; m < n_hits && keep_going; ++m) {
        int32_t slot = nodes_[idx].child[hits[m].c];
        if (level == depth_ - 1) {
            keep_going = visit(uint32_t(slot), hits[m].tin, hits[m].tout);
        } else {
            Vec3 clo = lo + Vec3{Real(hits[m].c & 1), Real((hits[m].c >> 1) & 1),
                                 Real((hits[m].c >> 2) & 1)} *
                                half;
            walk_node(level + 1, slot, clo, half, ray, std::max(hits[m].tin, t0),
                      std::min(hits[m].tout, t1), keep_going, visit);
        }
    }
}

void Octree::walk_ray(const Ray& ray,
                      const std::function<bool(uint32_t, Real, Real)>& visit) const {
    if (nodes_.empty()) return;
    auto h = ray_aabb_intersect(ray, root_bounds_);
    if (!h) return;
    bool keep_going = true;
    walk_node(0, 0, root_bounds_.min, root_bounds_.extent().x, ray,
              std::max(h->first, Real(0)), h->second, keep_going, visit);
}

Octree build_octree(const SparseVoxelGrid& grid, int depth) {
    if (grid.empty()) throw DataError("build_octree: empty grid, scene unusable");
    if (depth < 1) throw DataError("build_octree: depth must be >= 1");

    int64_t lo[3] = {INT64_MAX, INT64_MAX, INT64_MAX};
    int64_t hi[3] = {INT64_MIN, INT64_MIN, INT64_MIN};
    for (const auto& k : grid.occupied) {
        int64_t v[3] = {k.i, k.j, k.k};
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], v[a]);
            hi[a] = std::max(hi[a], v[a]);
        }
    }
    int64_t extent = 1;
    for (int a = 0; a < 3; ++a) extent = std::max(extent, hi[a] - lo[a] + 1);
    int m = 0;
    while ((int64_t(1) << m) < extent) ++m;
    const int64_t edge_vox = int64_t(1) << m;
    const Real s = grid.voxel_size;

    Vec3 root_min = grid.origin + Vec3{Real(lo[0]), Real(lo[1]), Real(lo[2])} * s;
    Real root_edge = Real(edge_vox) * s;
    Octree tree(Aabb{root_min, root_min + Vec3{1, 1, 1} * root_edge}, depth);

    // Leaf-cell index ranges per voxel, in exact integer arithmetic on the
    // common 2^depth refinement of the 2^m voxel lattice.
    const int64_t n_leaf = int64_t(1) << depth;
    auto leaf_range = [&](int64_t rel, int64_t& first, int64_t& last) {
        first = (rel << depth) >> m;                                 // floor(rel * n/e)
        last = ((((rel + 1) << depth) + edge_vox - 1) >> m) - 1;     // ceil - 1
        first = std::clamp<int64_t>(first, 0, n_leaf - 1);
        last = std::clamp<int64_t>(last, 0, n_leaf - 1);
    };
    for (const auto& k : grid.occupied) {
        int64_t i0, i1, j0, j1, k0, k1;
        leaf_range(k.i - lo[0], i0, i1);
        leaf_range(k.j - lo[1], j0, j1);
        leaf_range(k.k - lo[2], k0, k1);
        for (int64_t i = i0; i <= i1; ++i)
            for (int64_t j = j0; j <= j1; ++j)
                for (int64_t kk = k0; kk <= k1; ++kk) tree.materialize_leaf(i, j, kk);
    }
    return tree;
}

}  // namespace recon
