#pragma once

#include <string>

#include "recon/core.hpp"

namespace recon {

// PLY subset: float vertex x,y,z with optional nx,ny,nz, red/green/blue,
// integer "stage", and triangular faces. ASCII and binary little-endian.
struct PlyData {
    PointCloud cloud;
    std::vector<std::array<uint32_t, 3>> faces;

    bool has_faces() const { return !faces.empty(); }
    TriMesh as_mesh() const {
        TriMesh m;
        m.vertices = cloud.points;
        m.normals = cloud.normals;
        m.triangles = faces;
        return m;
    }
};

PlyData load_ply(const std::string& path);

void save_ply(const std::string& path, const PointCloud& cloud, bool binary = true);
void save_ply(const std::string& path, const TriMesh& mesh, bool binary = true);

}  // namespace recon
