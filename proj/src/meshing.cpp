#include "recon/meshing.hpp"

#include <cstdio>
#include <unordered_map>

namespace recon {

namespace {

// Bourke corner order: bit i of the cube index corresponds to kCorner[i].
const int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                           {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
const int kEdgeEnds[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

struct LatticeKey {
    int64_t x, y, z;
    int axis;  // -1 for corner keys, 0..2 for edge keys
    bool operator==(const LatticeKey&) const = default;
};
struct LatticeKeyHash {
    size_t operator()(const LatticeKey& k) const {
        uint64_t h = uint64_t(k.axis) + 0x9e3779b97f4a7c15ull;
        for (uint64_t v : {uint64_t(k.x), uint64_t(k.y), uint64_t(k.z)}) {
            h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            h *= 0xbf58476d1ce4e5b9ull;
            h ^= h >> 31;
        }
        return size_t(h);
    }
};

}  // namespace

TriMesh marching_cubes(const SdfBatchFn& sdf, const SparseVoxelGrid& grid,
                       int cells_per_voxel, bool with_normals) {
    if (cells_per_voxel < 1) throw DataError("marching_cubes: cells_per_voxel must be >= 1");
    const Real h = grid.voxel_size / cells_per_voxel;

    // Unique lattice corners over all cells of all occupied voxels.
    std::unordered_map<LatticeKey, uint32_t, LatticeKeyHash> corner_index;
    std::vector<Vec3> corner_pos;
    auto corner_at = [&](int64_t x, int64_t y, int64_t z) {
        auto [it, inserted] = corner_index.try_emplace(LatticeKey{x, y, z, -1},
                                                       uint32_t(corner_pos.size()));
        if (inserted)
            corner_pos.push_back(grid.origin + Vec3{Real(x), Real(y), Real(z)} * h);
        return it->second;
    };

    struct Cell {
        int64_t x, y, z;
        uint32_t corner[8];
    };
    std::vector<Cell> cells;
    for (const auto& key : grid.occupied) {
        for (int ci = 0; ci < cells_per_voxel; ++ci)
            for (int cj = 0; cj < cells_per_voxel; ++cj)
                for (int ck = 0; ck < cells_per_voxel; ++ck) {
                    Cell cell;
                    cell.x = key.i * cells_per_voxel + ci;
                    cell.y = key.j * cells_per_voxel + cj;
                    cell.z = key.k * cells_per_voxel + ck;
                    for (int v = 0; v < 8; ++v)
                        cell.corner[v] = corner_at(cell.x + kCorner[v][0],
                                                   cell.y + kCorner[v][1],
                                                   cell.z + kCorner[v][2]);
                    cells.push_back(cell);
                }
    }

    std::vector<Real> value(corner_pos.size());
    sdf(corner_pos, value);

    TriMesh mesh;
    std::unordered_map<LatticeKey, uint32_t, LatticeKeyHash> edge_vertex;
    auto vertex_on_edge = [&](const Cell& cell, int edge) {
        int a = kEdgeEnds[edge][0], b = kEdgeEnds[edge][1];
        int64_t ax = cell.x + kCorner[a][0], ay = cell.y + kCorner[a][1],
                az = cell.z + kCorner[a][2];
        int64_t bx = cell.x + kCorner[b][0], by = cell.y + kCorner[b][1],
                bz = cell.z + kCorner[b][2];
        int axis = bx != ax ? 0 : (by != ay ? 1 : 2);
        LatticeKey key{std::min(ax, bx), std::min(ay, by), std::min(az, bz), axis};
        auto [it, inserted] = edge_vertex.try_emplace(key, uint32_t(mesh.vertices.size()));
        if (inserted) {
            Real da = value[cell.corner[a]], db = value[cell.corner[b]];
            Real f = da / (da - db);  // sign change on this edge implies da != db
            const Vec3& pa = corner_pos[cell.corner[a]];
            const Vec3& pb = corner_pos[cell.corner[b]];
            mesh.vertices.push_back(pa + (pb - pa) * f);
        }
        return it->second;
    };

    for (const auto& cell : cells) {
        int cube = 0;
        for (int v = 0; v < 8; ++v)
            if (value[cell.corner[v]] < 0) cube |= 1 << v;
        if (mc::kEdgeTable[cube] == 0) continue;
        const int8_t* tri = mc::kTriTable[cube];
        for (int i = 0; tri[i] >= 0; i += 3) {
            // table order gives inward-facing triangles for inside<0; swap two
            // indices so normals point toward positive SDF
            uint32_t v0 = vertex_on_edge(cell, tri[i]);
            uint32_t v1 = vertex_on_edge(cell, tri[i + 2]);
            uint32_t v2 = vertex_on_edge(cell, tri[i + 1]);
            if (v0 == v1 || v1 == v2 || v0 == v2) continue;
            Vec3 e1 = mesh.vertices[v1] - mesh.vertices[v0];
            Vec3 e2 = mesh.vertices[v2] - mesh.vertices[v0];
            if (0.5 * e1.cross(e2).norm() <= 1e-12) continue;
            mesh.triangles.push_back({v0, v1, v2});
        }
    }

    if (mesh.triangles.empty())
        std::fprintf(stderr, "marching_cubes: no zero crossing found, mesh is empty\n");

    if (with_normals && !mesh.triangles.empty()) {
        mesh.normals.assign(mesh.vertices.size(), Vec3{});
        for (const auto& t : mesh.triangles) {
            Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
            Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
            Vec3 n = e1.cross(e2);  // area-weighted
            for (int v = 0; v < 3; ++v) mesh.normals[t[v]] += n;
        }
        for (auto& n : mesh.normals) n = n.normalized();
    }
    return mesh;
}

PointCloud sample_mesh_points(const TriMesh& mesh, Real density, uint64_t seed) {
    if (!(density > 0)) throw DataError("sample_mesh_points: density must be > 0");
    PointCloud cloud;
    if (mesh.triangles.empty()) return cloud;

    std::vector<Real> cum(mesh.triangles.size());
    Real total = 0;
    for (size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
        Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
        total += 0.5 * e1.cross(e2).norm();
        cum[i] = total;
    }
    if (total <= 0) return cloud;

    size_t n = size_t(std::llround(density * total));
    cloud.points.reserve(n);
    Rng rng(seed);
    std::uniform_real_distribution<Real> u01(0.0, 1.0);
    for (size_t i = 0; i < n; ++i) {
        Real pick = u01(rng) * total;
        size_t ti = size_t(std::lower_bound(cum.begin(), cum.end(), pick) - cum.begin());
        ti = std::min(ti, mesh.triangles.size() - 1);
        const auto& t = mesh.triangles[ti];
        Real a = u01(rng), b = u01(rng);
        if (a + b > 1) {
            a = 1 - a;
            b = 1 - b;
        }
        cloud.points.push_back(mesh.vertices[t[0]] +
                               (mesh.vertices[t[1]] - mesh.vertices[t[0]]) * a +
                               (mesh.vertices[t[2]] - mesh.vertices[t[0]]) * b);
    }
    return cloud;
}

}  // namespace recon
