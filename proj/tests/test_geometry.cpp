#include "doctest.h"

#include <random>

#include "recon/geometry.hpp"

using namespace recon;

namespace {

Vec3 random_unit(Rng& rng) {
    std::normal_distribution<Real> n;
    Vec3 v{n(rng), n(rng), n(rng)};
    while (v.norm() < 1e-6) v = {n(rng), n(rng), n(rng)};
    return v.normalized();
}

// Brute-force reference for ray_grid_intersect: slab-test every occupied cell.
std::optional<std::pair<Real, Real>> grid_hit_brute(const Ray& r, const SparseVoxelGrid& g) {
    bool found = false;
    Real tin = 0, tout = 0;
    for (const auto& k : g.occupied) {
        auto h = ray_aabb_intersect(r, g.cell_bounds(k));
        if (!h) continue;
        if (!found) {
            tin = h->first;
            tout = h->second;
            found = true;
        } else {
            tin = std::min(tin, h->first);
            tout = std::max(tout, h->second);
        }
    }
    if (!found || !(tin < tout)) return std::nullopt;
    return std::make_pair(tin, tout);
}

}  // namespace

TEST_CASE("ray_aabb_intersect basic hits and misses") {
    Aabb box{{-1, -1, -1}, {1, 1, 1}};

    auto h = ray_aabb_intersect({{-2, 0, 0}, {1, 0, 0}}, box);
    REQUIRE(h.has_value());
    CHECK(h->first == doctest::Approx(1).epsilon(1e-12));
    CHECK(h->second == doctest::Approx(3).epsilon(1e-12));

    h = ray_aabb_intersect({{0, 0, 0}, {0, 0, 1}}, box);
    REQUIRE(h.has_value());
    CHECK(h->first == doctest::Approx(-1));
    CHECK(h->second == doctest::Approx(1));
    CHECK(std::max(h->first, 0.0) == 0.0);

    CHECK(!ray_aabb_intersect({{-2, 5, 0}, {1, 0, 0}}, box).has_value());
    // behind the ray
    CHECK(!ray_aabb_intersect({{3, 0, 0}, {1, 0, 0}}, box).has_value());
}

TEST_CASE("ray_aabb_intersect endpoints lie on box faces") {
    Rng rng(7);
    std::uniform_real_distribution<Real> u(-3, 3);
    Aabb box{{-1, -1, -1}, {1, 1, 1}};
    int hits = 0;
    for (int i = 0; i < 2000; ++i) {
        Ray r{{u(rng), u(rng), u(rng)}, random_unit(rng)};
        auto h = ray_aabb_intersect(r, box);
        if (!h) continue;
        ++hits;
        for (Real t : {std::max(h->first, 0.0), h->second}) {
            Vec3 p = r.at(t);
            Real face = 0;
            bool inside = true;
            for (int a = 0; a < 3; ++a) {
                face = std::max(face, std::min(std::abs(p[a] - box.min[a]),
                                               std::abs(p[a] - box.max[a])));
                inside = inside && p[a] >= box.min[a] - 1e-9 && p[a] <= box.max[a] + 1e-9;
            }
            CHECK(inside);
            // entry/exit point sits on (or inside, when clamped) the boundary
            if (t == h->first || t == h->second) CHECK(face <= 3.0 + 1e-9);
        }
        CHECK(std::max(h->first, 0.0) <= h->second);
    }
    CHECK(hits > 100);
}

TEST_CASE("voxelize_points bins and dedups") {
    std::vector<Vec3> pts{{0.1, 0.1, 0.1}};
    auto g = voxelize_points(pts, 1.0, {});
    CHECK(g.occupied.size() == 1);
    CHECK(g.occupied.count({0, 0, 0}) == 1);

    pts = {{0.1, 0, 0}, {0.9, 0, 0}};
    g = voxelize_points(pts, 1.0, {});
    CHECK(g.occupied.size() == 1);

    CHECK(voxelize_points({}, 1.0, {}).empty());
}

TEST_CASE("voxelize_points matches brute-force binning on random input") {
    Rng rng(11);
    std::uniform_real_distribution<Real> u(0.0, 4.0);
    std::vector<Vec3> pts(1000);
    for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
    auto g = voxelize_points(pts, 1.0, {});

    std::unordered_set<VoxelKey, VoxelKeyHash> expect;
    for (const auto& p : pts)
        expect.insert({int64_t(std::floor(p.x)), int64_t(std::floor(p.y)),
                       int64_t(std::floor(p.z))});
    CHECK(g.occupied == expect);
    for (const auto& k : g.occupied) {
        CHECK(k.i >= 0);
        CHECK(k.i <= 3);
        CHECK(k.j >= 0);
        CHECK(k.j <= 3);
        CHECK(k.k >= 0);
        CHECK(k.k <= 3);
        // cell center within (sqrt(3)/2)*s of some input point
        Vec3 c = g.cell_center(k);
        Real best = 1e9;
        for (const auto& p : pts) best = std::min(best, (p - c).norm());
        CHECK(best <= std::sqrt(3.0) / 2 + 1e-12);
    }
}

TEST_CASE("dilate cube structuring element") {
    SparseVoxelGrid g;
    g.voxel_size = 1;
    g.occupied.insert({0, 0, 0});
    auto d = dilate(g, 1);
    CHECK(d.occupied.size() == 27);
    for (int64_t i = -1; i <= 1; ++i)
        for (int64_t j = -1; j <= 1; ++j)
            for (int64_t k = -1; k <= 1; ++k) CHECK(d.occupied.count({i, j, k}) == 1);

    CHECK(dilate(g, 0).occupied == g.occupied);

    g.occupied.insert({1, 0, 0});
    CHECK(dilate(g, 1).occupied.size() == 36);
}

TEST_CASE("dilate composes additively") {
    Rng rng(3);
    std::uniform_int_distribution<int64_t> u(-4, 4);
    SparseVoxelGrid g;
    g.voxel_size = 0.5;
    for (int i = 0; i < 20; ++i) g.occupied.insert({u(rng), u(rng), u(rng)});
    for (auto [a, b] : {std::pair{1, 1}, {2, 1}, {0, 3}}) {
        auto lhs = dilate(dilate(g, a), b);
        auto rhs = dilate(g, a + b);
        CHECK(lhs.occupied == rhs.occupied);
    }
}

TEST_CASE("ray_grid_intersect on single voxel and gaps") {
    SparseVoxelGrid g;
    g.voxel_size = 1;
    g.occupied.insert({0, 0, 0});
    Ray r{{-1, 0.5, 0.5}, {1, 0, 0}};
    auto h = ray_grid_intersect(r, g);
    REQUIRE(h.has_value());
    CHECK(h->first == doctest::Approx(1));
    CHECK(h->second == doctest::Approx(2));

    SparseVoxelGrid empty;
    empty.voxel_size = 1;
    CHECK(!ray_grid_intersect(r, empty).has_value());

    g.occupied.insert({5, 0, 0});
    h = ray_grid_intersect(r, g);
    REQUIRE(h.has_value());
    CHECK(h->first == doctest::Approx(1));
    CHECK(h->second == doctest::Approx(7));
}

TEST_CASE("ray_grid_intersect agrees with per-voxel slab oracle") {
    Rng rng(17);
    std::uniform_int_distribution<int64_t> cell(0, 7);
    std::uniform_real_distribution<Real> u(-6, 10);
    SparseVoxelGrid g;
    g.voxel_size = 0.75;
    g.origin = {-1, 0.25, 0.5};
    for (int i = 0; i < 60; ++i) g.occupied.insert({cell(rng), cell(rng), cell(rng)});

    int hits = 0;
    for (int i = 0; i < 5000; ++i) {
        Ray r{{u(rng), u(rng), u(rng)}, random_unit(rng)};
        auto fast = ray_grid_intersect(r, g);
        auto slow = grid_hit_brute(r, g);
        REQUIRE(fast.has_value() == slow.has_value());
        if (fast) {
            ++hits;
            CHECK(fast->first == doctest::Approx(slow->first).epsilon(1e-10));
            CHECK(fast->second == doctest::Approx(slow->second).epsilon(1e-10));
        }
    }
    CHECK(hits > 200);
}

TEST_CASE("ray_grid_intersect none iff every cell misses (exhaustive small grid)") {
    Rng rng(23);
    std::uniform_int_distribution<int64_t> cell(0, 7);
    std::uniform_real_distribution<Real> u(-4, 8);
    SparseVoxelGrid g;
    g.voxel_size = 1;
    for (int i = 0; i < 40; ++i) g.occupied.insert({cell(rng), cell(rng), cell(rng)});
    REQUIRE(g.occupied.size() <= 512);

    for (int i = 0; i < 2000; ++i) {
        Ray r{{u(rng), u(rng), u(rng)}, random_unit(rng)};
        bool any = false;
        for (const auto& k : g.occupied)
            any = any || ray_aabb_intersect(r, g.cell_bounds(k)).has_value();
        CHECK(ray_grid_intersect(r, g).has_value() == any);
    }
}

TEST_CASE("build_octree materializes exactly intersecting leaves") {
    SparseVoxelGrid one;
    one.voxel_size = 1;
    one.occupied.insert({0, 0, 0});
    auto t1 = build_octree(one, 1);
    CHECK(t1.leaf_count() >= 1);
    CHECK(t1.leaf_count() <= 8);
    CHECK(t1.leaf_edge() == doctest::Approx(0.5));

    SparseVoxelGrid full;
    full.voxel_size = 1;
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t j = 0; j < 4; ++j)
            for (int64_t k = 0; k < 4; ++k) full.occupied.insert({i, j, k});
    auto t2 = build_octree(full, 2);
    CHECK(t2.leaf_count() == 64);

    SparseVoxelGrid empty;
    CHECK_THROWS_AS(build_octree(empty, 3), DataError);
}

TEST_CASE("build_octree leaf set equals brute-force cell/voxel intersection") {
    Rng rng(31);
    std::uniform_int_distribution<int64_t> cell(-3, 5);
    SparseVoxelGrid g;
    g.voxel_size = 0.6;
    g.origin = {0.2, -0.4, 0.1};
    for (int i = 0; i < 25; ++i) g.occupied.insert({cell(rng), cell(rng), cell(rng)});

    const int depth = 4;
    auto tree = build_octree(g, depth);

    // Root spans 2^m voxels; place leaf cells and voxels on their common
    // integer refinement so touching faces do not count as overlap.
    int64_t kmin[3] = {INT64_MAX, INT64_MAX, INT64_MAX};
    int64_t kmax[3] = {INT64_MIN, INT64_MIN, INT64_MIN};
    for (const auto& key : g.occupied) {
        int64_t v[3] = {key.i, key.j, key.k};
        for (int a = 0; a < 3; ++a) {
            kmin[a] = std::min(kmin[a], v[a]);
            kmax[a] = std::max(kmax[a], v[a]);
        }
    }
    int64_t extent = 1;
    for (int a = 0; a < 3; ++a) extent = std::max(extent, kmax[a] - kmin[a] + 1);
    int m = 0;
    while ((int64_t(1) << m) < extent) ++m;

    // leaf i covers [i*2^m, (i+1)*2^m); voxel rel covers [rel*2^depth, ...)
    auto overlap1d = [&](int64_t i, int64_t rel) {
        int64_t l0 = i << m, l1 = (i + 1) << m;
        int64_t v0 = rel << depth, v1 = (rel + 1) << depth;
        return std::max(l0, v0) < std::min(l1, v1);
    };
    const int64_t n = 1 << depth;
    size_t expect = 0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j)
            for (int64_t k = 0; k < n; ++k) {
                bool overlap = false;
                for (const auto& key : g.occupied)
                    if (overlap1d(i, key.i - kmin[0]) && overlap1d(j, key.j - kmin[1]) &&
                        overlap1d(k, key.k - kmin[2])) {
                        overlap = true;
                        break;
                    }
                if (overlap) {
                    ++expect;
                    Vec3 c = tree.root_bounds().min +
                             Vec3{Real(i) + 0.5, Real(j) + 0.5, Real(k) + 0.5} *
                                 tree.leaf_edge();
                    CHECK(tree.leaf_at(c).has_value());
                }
            }
    CHECK(tree.leaf_count() == expect);
}

TEST_CASE("octree leaf edge is exact power-of-two division") {
    SparseVoxelGrid g;
    g.voxel_size = 2.8;
    g.occupied.insert({0, 0, 0});
    g.occupied.insert({6, 2, 1});
    for (int depth : {1, 3, 7, 10}) {
        auto t = build_octree(g, depth);
        Real root = t.root_bounds().extent().x;
        CHECK(t.leaf_edge() == std::ldexp(root, -depth));
    }
}

TEST_CASE("octree_leaf_at agrees with linear scan") {
    Rng rng(41);
    std::uniform_int_distribution<int64_t> cell(0, 9);
    SparseVoxelGrid g;
    g.voxel_size = 0.5;
    for (int i = 0; i < 30; ++i) g.occupied.insert({cell(rng), cell(rng), cell(rng)});
    auto tree = build_octree(g, 4);

    // p at the center of a materialized leaf resolves to that leaf
    for (uint32_t li = 0; li < tree.leaf_count(); li += 7) {
        auto found = tree.leaf_at(tree.leaf(li).center);
        REQUIRE(found.has_value());
        CHECK(*found == li);
    }
    // p outside root bounds
    CHECK(!tree.leaf_at(tree.root_bounds().max + Vec3{1, 0, 0}).has_value());

    std::uniform_real_distribution<Real> u(-1, 7);
    Real edge = tree.leaf_edge();
    for (int i = 0; i < 10000; ++i) {
        Vec3 p{u(rng), u(rng), u(rng)};
        auto found = tree.leaf_at(p);
        // linear scan over leaf boxes
        std::optional<uint32_t> expect;
        for (uint32_t li = 0; li < tree.leaf_count(); ++li) {
            Vec3 c = tree.leaf(li).center;
            Vec3 lo = c - Vec3{0.5, 0.5, 0.5} * edge;
            if (Aabb{lo, lo + Vec3{1, 1, 1} * edge}.contains_halfopen(p)) {
                expect = li;
                break;
            }
        }
        CHECK(found.has_value() == expect.has_value());
        if (found && expect) CHECK(*found == *expect);
    }
}

TEST_CASE("octree walk_ray visits leaves in ascending order") {
    Rng rng(43);
    std::uniform_int_distribution<int64_t> cell(0, 9);
    std::uniform_real_distribution<Real> u(-2, 8);
    SparseVoxelGrid g;
    g.voxel_size = 0.5;
    for (int i = 0; i < 40; ++i) g.occupied.insert({cell(rng), cell(rng), cell(rng)});
    auto tree = build_octree(g, 4);

    for (int i = 0; i < 500; ++i) {
        Ray r{{u(rng), u(rng), u(rng)}, random_unit(rng)};
        Real prev = -std::numeric_limits<Real>::infinity();
        size_t count = 0;
        tree.walk_ray(r, [&](uint32_t, Real tin, Real tout) {
            CHECK(tin <= tout + 1e-12);
            CHECK(tin >= prev - 1e-9);
            prev = tin;
            ++count;
            return true;
        });
        (void)count;
    }
}
