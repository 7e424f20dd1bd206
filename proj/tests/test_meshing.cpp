#include "doctest.h"

#include <random>

#include "recon/meshing.hpp"

using namespace recon;

namespace {

SdfBatchFn analytic(std::function<Real(const Vec3&)> f) {
    return [f](std::span<const Vec3> pts, std::span<Real> out) {
        for (size_t i = 0; i < pts.size(); ++i) out[i] = f(pts[i]);
    };
}

SparseVoxelGrid cube_grid(int64_t lo, int64_t hi, Real s) {
    SparseVoxelGrid g;
    g.voxel_size = s;
    for (int64_t i = lo; i <= hi; ++i)
        for (int64_t j = lo; j <= hi; ++j)
            for (int64_t k = lo; k <= hi; ++k) g.occupied.insert({i, j, k});
    return g;
}

}  // namespace

TEST_CASE("marching_cubes on the analytic sphere") {
    SparseVoxelGrid g = cube_grid(-4, 3, 0.2);  // covers [-0.8, 0.8)
    const int cpv = 4;
    const Real h = 0.2 / cpv;
    TriMesh mesh = marching_cubes(analytic([](const Vec3& p) { return p.norm() - 0.5; }), g,
                                  cpv);
    REQUIRE(mesh.triangles.size() > 100);
    REQUIRE(mesh.normals.size() == mesh.vertices.size());
    Real bound = std::sqrt(3.0) * h;
    for (const auto& v : mesh.vertices) {
        CHECK(v.norm() >= 0.5 - bound);
        CHECK(v.norm() <= 0.5 + bound);
    }
    // |sdf(vertex)| <= max|grad| * h with |grad| = 1 for a true distance field
    for (const auto& v : mesh.vertices) CHECK(std::abs(v.norm() - 0.5) <= h);
    // every vertex lies within an occupied voxel dilated by one lattice cell
    SparseVoxelGrid pad = dilate(g, 1);
    for (const auto& v : mesh.vertices) CHECK(pad.contains(v));
    // indices in range, no degenerate triangles
    for (const auto& t : mesh.triangles) {
        for (uint32_t idx : t) CHECK(idx < mesh.vertices.size());
        Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
        Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
        CHECK(0.5 * e1.cross(e2).norm() > 1e-12);
    }
}

TEST_CASE("marching_cubes trivial cases") {
    SparseVoxelGrid g = cube_grid(0, 2, 0.25);
    TriMesh empty = marching_cubes(analytic([](const Vec3&) { return 1.0; }), g, 2);
    CHECK(empty.vertices.empty());
    CHECK(empty.triangles.empty());

    CHECK_THROWS_AS(marching_cubes(analytic([](const Vec3&) { return 1.0; }), g, 0),
                    DataError);
}

TEST_CASE("marching_cubes on the plane z = 0") {
    SparseVoxelGrid g = cube_grid(-2, 1, 0.5);  // covers [-1, 1)
    const int cpv = 5;
    const Real h = 0.5 / cpv;
    TriMesh mesh = marching_cubes(analytic([](const Vec3& p) { return p.z; }), g, cpv);
    REQUIRE(!mesh.triangles.empty());
    for (const auto& v : mesh.vertices) CHECK(std::abs(v.z) <= h);
    for (const auto& n : mesh.normals) {
        CHECK(n.z == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(n.x) < 1e-9);
        CHECK(std::abs(n.y) < 1e-9);
    }
}

TEST_CASE("sample_mesh_points: counts, uniformity, validity") {
    // unit square as two triangles
    TriMesh square;
    square.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    square.triangles = {{0, 1, 2}, {0, 2, 3}};
    PointCloud cloud = sample_mesh_points(square, 100.0, 7);
    CHECK(cloud.points.size() == 100);

    // chi^2 uniformity over a 4x4 grid, 15 dof, p > 0.01 -> chi2 < 30.578
    Real counts[16] = {};
    for (const auto& p : cloud.points) {
        CHECK(p.x >= 0);
        CHECK(p.x <= 1);
        CHECK(p.y >= 0);
        CHECK(p.y <= 1);
        int cx = std::min(int(p.x * 4), 3), cy = std::min(int(p.y * 4), 3);
        counts[cy * 4 + cx] += 1;
    }
    Real chi2 = 0;
    for (Real c : counts) chi2 += (c - 6.25) * (c - 6.25) / 6.25;
    CHECK(chi2 < 30.578);

    // single triangle: barycentric validity
    TriMesh tri;
    tri.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 2, 0}};
    tri.triangles = {{0, 1, 2}};
    PointCloud tc = sample_mesh_points(tri, 50.0, 3);
    for (const auto& p : tc.points) {
        CHECK(p.x >= -1e-12);
        CHECK(p.y >= -1e-12);
        CHECK(p.x / 2 + p.y / 2 <= 1 + 1e-12);
    }

    // deterministic under seed
    PointCloud again = sample_mesh_points(square, 100.0, 7);
    CHECK(again.points.size() == cloud.points.size());
    for (size_t i = 0; i < cloud.points.size(); ++i)
        CHECK(again.points[i] == cloud.points[i]);

    CHECK_THROWS_AS(sample_mesh_points(square, 0.0, 1), DataError);
    CHECK(sample_mesh_points(TriMesh{}, 10.0, 1).points.empty());
}

TEST_CASE("marching cubes restricted to the envelope skips outside cells") {
    // occupied voxels only in the x > 0 half: the mesh must not extend past it
    SparseVoxelGrid g;
    g.voxel_size = 0.25;
    for (int64_t i = 0; i <= 3; ++i)
        for (int64_t j = -4; j <= 3; ++j)
            for (int64_t k = -4; k <= 3; ++k) g.occupied.insert({i, j, k});
    TriMesh mesh =
        marching_cubes(analytic([](const Vec3& p) { return p.norm() - 0.5; }), g, 4);
    REQUIRE(!mesh.vertices.empty());
    for (const auto& v : mesh.vertices) CHECK(v.x >= -1e-9);
}
