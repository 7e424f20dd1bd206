#include "recon/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "recon/png_io.hpp"

namespace fs = std::filesystem;

namespace recon {

void Camera::validate() const {
    if (!(fx > 0) || !(fy > 0)) throw DataError("camera: focal lengths must be > 0");
    if (!(cx > 0 && cx < width && cy > 0 && cy < height))
        throw DataError("camera: principal point outside the image");
    // R^T R = I within 1e-6
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            Real dot = 0;
            for (int k = 0; k < 3; ++k) dot += rotation[k][i] * rotation[k][j];
            if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-6)
                throw DataError("camera: rotation not orthonormal");
        }
}

void quat_to_rotation(Real qw, Real qx, Real qy, Real qz, Real R[3][3]) {
    Real n = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
    if (n == 0) throw DataError("quaternion: zero norm");
    qw /= n; qx /= n; qy /= n; qz /= n;
    R[0][0] = 1 - 2 * (qy * qy + qz * qz);
    R[0][1] = 2 * (qx * qy - qz * qw);
    R[0][2] = 2 * (qx * qz + qy * qw);
    R[1][0] = 2 * (qx * qy + qz * qw);
    R[1][1] = 1 - 2 * (qx * qx + qz * qz);
    R[1][2] = 2 * (qy * qz - qx * qw);
    R[2][0] = 2 * (qx * qz - qy * qw);
    R[2][1] = 2 * (qy * qz + qx * qw);
    R[2][2] = 1 - 2 * (qx * qx + qy * qy);
}

namespace {

struct LineReader {
    std::ifstream in;
    std::string path;
    int line_no = 0;

    explicit LineReader(const std::string& p) : in(p), path(p) {
        if (!in) throw DataError("cannot open " + p);
    }
    // next non-comment, non-empty line; false at EOF
    bool next(std::string& line) {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            size_t i = line.find_first_not_of(" \t");
            if (i == std::string::npos) continue;
            if (line[i] == '#') continue;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw DataError(path + ":" + std::to_string(line_no) + ": " + what);
    }
};

}  // namespace

ColmapScene load_colmap_scene(const std::string& dir) {
    ColmapScene scene;

    // cameras.txt: CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]
    std::unordered_map<int, Camera> cameras;
    {
        LineReader r(dir + "/cameras.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream ls(line);
            int id, w, h;
            std::string model;
            if (!(ls >> id >> model >> w >> h)) r.fail("malformed camera line");
            Camera cam;
            cam.width = w;
            cam.height = h;
            if (model == "SIMPLE_PINHOLE") {
                Real f;
                if (!(ls >> f >> cam.cx >> cam.cy)) r.fail("malformed SIMPLE_PINHOLE params");
                cam.fx = cam.fy = f;
            } else if (model == "PINHOLE") {
                if (!(ls >> cam.fx >> cam.fy >> cam.cx >> cam.cy))
                    r.fail("malformed PINHOLE params");
            } else {
                r.fail("unsupported camera model '" + model + "'");
            }
            cameras[id] = cam;
        }
    }

    // images.txt: IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME + a 2D-point line
    {
        LineReader r(dir + "/images.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream ls(line);
            ImageRecord rec;
            Real qw, qx, qy, qz;
            int cam_id;
            if (!(ls >> rec.id >> qw >> qx >> qy >> qz >> rec.camera.translation.x >>
                  rec.camera.translation.y >> rec.camera.translation.z >> cam_id >> rec.name))
                r.fail("malformed image line");
            auto it = cameras.find(cam_id);
            if (it == cameras.end()) r.fail("unknown camera id " + std::to_string(cam_id));
            Vec3 t = rec.camera.translation;
            rec.camera = it->second;
            rec.camera.translation = t;
            quat_to_rotation(qw, qx, qy, qz, rec.camera.rotation);
            rec.camera.validate();
            // the observations line (may be empty)
            if (!std::getline(r.in, line)) r.fail("missing observations line");
            ++r.line_no;
            scene.images.push_back(std::move(rec));
        }
    }
    std::sort(scene.images.begin(), scene.images.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
    for (size_t i = 0; i < scene.images.size(); ++i)
        scene.images[i].appearance_index = int(i);

    // points3D.txt: POINT3D_ID X Y Z R G B ERROR TRACK[] as (IMAGE_ID POINT2D_IDX)*
    {
        LineReader r(dir + "/points3D.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream ls(line);
            long id;
            SfmPoint p;
            int rgb[3];
            if (!(ls >> id >> p.position.x >> p.position.y >> p.position.z >> rgb[0] >>
                  rgb[1] >> rgb[2] >> p.reprojection_error))
                r.fail("malformed point line");
            for (int c = 0; c < 3; ++c) p.color[c] = rgb[c] / 255.0;
            long img, feat;
            int track = 0;
            while (ls >> img >> feat) ++track;
            p.track_length = track;
            scene.points.push_back(p);
        }
    }
    return scene;
}

void load_images_and_masks(const std::string& dir, std::vector<ImageRecord>& images) {
    for (auto& rec : images) {
        fs::path img_path = fs::path(dir) / "images" / rec.name;
        ImageU8 img = load_png(img_path.string());
        if (img.width != rec.camera.width || img.height != rec.camera.height)
            throw DataError("image size mismatch for " + rec.name);
        size_t n = size_t(img.width) * img.height;
        rec.rgb.resize(n * 3);
        for (size_t i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c)
                rec.rgb[i * 3 + c] =
                    img.pixels[i * img.channels + (img.channels == 3 ? c : 0)] / 255.0f;

        std::string stem = fs::path(rec.name).stem().string();
        auto load_mask = [&](const std::string& suffix, std::vector<uint8_t>& out) {
            fs::path p = fs::path(dir) / "masks" / (stem + suffix);
            if (!fs::exists(p)) return;
            ImageU8 m = load_png(p.string());
            if (m.width != rec.camera.width || m.height != rec.camera.height)
                throw DataError("mask size mismatch for " + rec.name);
            out.resize(n);
            for (size_t i = 0; i < n; ++i) out[i] = m.pixels[i * m.channels] ? 1 : 0;
        };
        load_mask("_transient.png", rec.transient);
        load_mask("_sky.png", rec.sky);
    }
}

std::vector<SfmPoint> filter_sfm_points(const std::vector<SfmPoint>& points,
                                        int min_track_len, Real max_reproj) {
    std::vector<SfmPoint> out;
    out.reserve(points.size());
    for (const auto& p : points)
        if (p.track_length >= min_track_len && p.reprojection_error <= max_reproj)
            out.push_back(p);
    return out;
}

Ray pixel_ray(const Camera& cam, Real u, Real v) {
    Vec3 d_cam{(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0};
    Vec3 d;
    for (int i = 0; i < 3; ++i)
        d[i] = cam.rotation[0][i] * d_cam.x + cam.rotation[1][i] * d_cam.y +
               cam.rotation[2][i] * d_cam.z;
    return {cam.center(), d.normalized()};
}

}  // namespace recon
