#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace recon {

using Real = double;

// Exit-code carrying error classes. The CLI maps UsageError -> 1,
// DataError -> 2, NumericalError -> 3.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

struct Vec3 {
    Real x = 0, y = 0, z = 0;

    Real& operator[](int i) { return (&x)[i]; }
    Real operator[](int i) const { return (&x)[i]; }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(Real s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(Real s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(Real s) { x *= s; y *= s; z *= s; return *this; }

    Real dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    Real squared_norm() const { return dot(*this); }
    Real norm() const { return std::sqrt(squared_norm()); }
    Vec3 normalized() const {
        Real n = norm();
        return n > 0 ? *this / n : Vec3{};
    }
    Vec3 cwise_min(const Vec3& o) const {
        return {std::min(x, o.x), std::min(y, o.y), std::min(z, o.z)};
    }
    Vec3 cwise_max(const Vec3& o) const {
        return {std::max(x, o.x), std::max(y, o.y), std::max(z, o.z)};
    }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
    bool operator==(const Vec3& o) const = default;
};

inline Vec3 operator*(Real s, const Vec3& v) { return v * s; }

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length

    Vec3 at(Real t) const { return origin + direction * t; }
};

struct Aabb {
    Vec3 min{std::numeric_limits<Real>::max(), std::numeric_limits<Real>::max(),
             std::numeric_limits<Real>::max()};
    Vec3 max{std::numeric_limits<Real>::lowest(), std::numeric_limits<Real>::lowest(),
             std::numeric_limits<Real>::lowest()};

    bool valid() const { return min.x <= max.x && min.y <= max.y && min.z <= max.z; }
    Vec3 center() const { return (min + max) * 0.5; }
    Vec3 extent() const { return max - min; }
    void expand(const Vec3& p) { min = min.cwise_min(p); max = max.cwise_max(p); }
    // Half-open containment [min, max), matching the voxel cell convention.
    bool contains_halfopen(const Vec3& p) const {
        return p.x >= min.x && p.x < max.x && p.y >= min.y && p.y < max.y &&
               p.z >= min.z && p.z < max.z;
    }
};

// Batch SDF evaluator shared by meshing, cache refresh and test oracles.
using SdfBatchFn = std::function<void(std::span<const Vec3>, std::span<Real>)>;

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;             // empty or same size as points
    std::vector<std::array<uint8_t, 3>> colors;  // empty or same size as points
    std::vector<int> stages;               // empty or same size (sampling debug)
};

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<uint32_t, 3>> triangles;
    std::vector<Vec3> normals;  // empty or per-vertex

    Real area() const {
        Real a = 0;
        for (const auto& t : triangles) {
            Vec3 e1 = vertices[t[1]] - vertices[t[0]];
            Vec3 e2 = vertices[t[2]] - vertices[t[0]];
            a += 0.5 * e1.cross(e2).norm();
        }
        return a;
    }
};

}  // namespace recon
