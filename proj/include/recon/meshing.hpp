#pragma once

#include "recon/core.hpp"
#include "recon/geometry.hpp"

namespace recon {

namespace mc {
extern const int kEdgeTable[256];
extern const int8_t kTriTable[256][16];
}  // namespace mc

// Zero-isosurface extraction on a lattice restricted to the occupied voxels
// (resolution = voxel_size / cells_per_voxel). Vertices sit on cell edges by
// linear interpolation; per-vertex normals are area-weighted face normals.
TriMesh marching_cubes(const SdfBatchFn& sdf, const SparseVoxelGrid& grid,
                       int cells_per_voxel, bool with_normals = true);

// Area-weighted uniform surface sampling; round(density * area) points.
PointCloud sample_mesh_points(const TriMesh& mesh, Real density, uint64_t seed);

}  // namespace recon
