#pragma once

#include <string>

#include "recon/core.hpp"

namespace recon {

// Pinhole camera, COLMAP world-to-camera convention: x_cam = R * x_world + t.
struct Camera {
    int width = 0, height = 0;
    Real fx = 0, fy = 0, cx = 0, cy = 0;
    Real rotation[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    Vec3 translation;

    Vec3 center() const {  // -R^T t
        Vec3 c;
        for (int i = 0; i < 3; ++i)
            c[i] = -(rotation[0][i] * translation.x + rotation[1][i] * translation.y +
                     rotation[2][i] * translation.z);
        return c;
    }
    Vec3 world_to_cam(const Vec3& p) const {
        Vec3 q;
        for (int i = 0; i < 3; ++i)
            q[i] = rotation[i][0] * p.x + rotation[i][1] * p.y + rotation[i][2] * p.z +
                   translation[i];
        return q;
    }
    // Projects a world point; returns false when behind the camera.
    bool project(const Vec3& p, Real& u, Real& v) const {
        Vec3 q = world_to_cam(p);
        if (q.z <= 0) return false;
        u = fx * q.x / q.z + cx;
        v = fy * q.y / q.z + cy;
        return true;
    }
    void validate() const;
};

struct ImageRecord {
    int id = 0;
    std::string name;
    Camera camera;
    int appearance_index = 0;           // unique per image, dense 0..N-1
    std::vector<float> rgb;             // H*W*3 in [0,1]; empty if pixels not loaded
    std::vector<uint8_t> transient;     // H*W, nonzero = transient (drop)
    std::vector<uint8_t> sky;           // H*W, nonzero = sky (free-space supervision)

    bool pixel_loaded() const { return !rgb.empty(); }
    void target_color(int x, int y, Real out[3]) const {
        size_t o = size_t(y * camera.width + x) * 3;
        out[0] = rgb[o];
        out[1] = rgb[o + 1];
        out[2] = rgb[o + 2];
    }
    bool is_transient(int x, int y) const {
        return !transient.empty() && transient[size_t(y) * camera.width + x] != 0;
    }
    bool is_sky(int x, int y) const {
        return !sky.empty() && sky[size_t(y) * camera.width + x] != 0;
    }
};

struct SfmPoint {
    Vec3 position;
    int track_length = 0;
    Real reprojection_error = 0;
    Real color[3] = {0, 0, 0};
};

struct ColmapScene {
    std::vector<ImageRecord> images;  // metadata only; pixels loaded separately
    std::vector<SfmPoint> points;
};

// Parses cameras.txt / images.txt / points3D.txt (COLMAP text layout,
// PINHOLE and SIMPLE_PINHOLE only). Malformed lines raise DataError with the
// file and line number.
ColmapScene load_colmap_scene(const std::string& dir);

// Loads pixels from <dir>/images/<name> and mask PNGs from <dir>/masks/
// (<stem>_transient.png, <stem>_sky.png; both optional) into each record.
void load_images_and_masks(const std::string& dir, std::vector<ImageRecord>& images);

std::vector<SfmPoint> filter_sfm_points(const std::vector<SfmPoint>& points,
                                        int min_track_len, Real max_reproj);

// origin = camera center, direction = normalize(R^T K^-1 (u, v, 1)).
Ray pixel_ray(const Camera& cam, Real u, Real v);

// w-x-y-z quaternion to rotation matrix (used by the COLMAP reader and tests).
void quat_to_rotation(Real qw, Real qx, Real qy, Real qz, Real R[3][3]);

}  // namespace recon
