#include "recon/synth.hpp"

#include <filesystem>
#include <fstream>
#include <numbers>

#include "recon/config.hpp"
#include "recon/geometry.hpp"
#include "recon/meshing.hpp"
#include "recon/ply.hpp"
#include "recon/png_io.hpp"

namespace fs = std::filesystem;

namespace recon {

namespace {

constexpr Real kPi = std::numbers::pi_v<Real>;

Real box_sdf(const Vec3& p, const Vec3& half) {
    Vec3 q{std::abs(p.x) - half.x, std::abs(p.y) - half.y, std::abs(p.z) - half.z};
    Vec3 qp{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
    return qp.norm() + std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
}

}  // namespace

AnalyticShape make_shape(const std::string& tag) {
    AnalyticShape shape;
    shape.tag = tag;
    if (tag == "sphere") {
        shape.sdf = [](const Vec3& p) { return p.norm() - 0.5; };
        shape.bounding_radius = 0.5;
    } else if (tag == "box") {
        Vec3 half{0.4, 0.32, 0.36};
        shape.sdf = [half](const Vec3& p) { return box_sdf(p, half); };
        shape.bounding_radius = half.norm();
    } else if (tag == "two-spheres") {
        Vec3 c0{-0.25, 0, 0}, c1{0.25, 0, 0};
        shape.sdf = [c0, c1](const Vec3& p) {
            return std::min((p - c0).norm() - 0.35, (p - c1).norm() - 0.35);
        };
        shape.bounding_radius = 0.6;
    } else {
        throw UsageError("unknown shape '" + tag + "' (sphere | box | two-spheres)");
    }
    return shape;
}

Vec3 shape_normal(const AnalyticShape& shape, const Vec3& p) {
    const Real h = 1e-5;
    Vec3 n{shape.sdf({p.x + h, p.y, p.z}) - shape.sdf({p.x - h, p.y, p.z}),
           shape.sdf({p.x, p.y + h, p.z}) - shape.sdf({p.x, p.y - h, p.z}),
           shape.sdf({p.x, p.y, p.z + h}) - shape.sdf({p.x, p.y, p.z - h})};
    return n.normalized();
}

std::vector<Vec3> sample_shape_surface(const AnalyticShape& shape, size_t count, Rng& rng) {
    std::vector<Vec3> out;
    out.reserve(count);
    std::normal_distribution<Real> gauss;
    std::uniform_real_distribution<Real> u01(0.0, 1.0);
    auto unit = [&] {
        Vec3 v{gauss(rng), gauss(rng), gauss(rng)};
        while (v.norm() < 1e-9) v = {gauss(rng), gauss(rng), gauss(rng)};
        return v.normalized();
    };
    while (out.size() < count) {
        if (shape.tag == "sphere") {
            out.push_back(unit() * 0.5);
        } else if (shape.tag == "two-spheres") {
            Vec3 c = u01(rng) < 0.5 ? Vec3{-0.25, 0, 0} : Vec3{0.25, 0, 0};
            Vec3 p = c + unit() * 0.35;
            if (shape.sdf(p) > -1e-9) out.push_back(p);
        } else {  // box: faces weighted by area
            Vec3 half{0.4, 0.32, 0.36};
            Real areas[3] = {half.y * half.z, half.x * half.z, half.x * half.y};
            Real total = areas[0] + areas[1] + areas[2];
            Real pick = u01(rng) * total;
            int axis = pick < areas[0] ? 0 : (pick < areas[0] + areas[1] ? 1 : 2);
            Vec3 p{(2 * u01(rng) - 1) * half.x, (2 * u01(rng) - 1) * half.y,
                   (2 * u01(rng) - 1) * half.z};
            p[axis] = u01(rng) < 0.5 ? -half[axis] : half[axis];
            out.push_back(p);
        }
    }
    return out;
}

void rotation_to_quat(const Real R[3][3], Real& qw, Real& qx, Real& qy, Real& qz) {
    Real trace = R[0][0] + R[1][1] + R[2][2];
    if (trace > 0) {
        Real s = std::sqrt(trace + 1.0) * 2;
        qw = 0.25 * s;
        qx = (R[2][1] - R[1][2]) / s;
        qy = (R[0][2] - R[2][0]) / s;
        qz = (R[1][0] - R[0][1]) / s;
    } else if (R[0][0] > R[1][1] && R[0][0] > R[2][2]) {
        Real s = std::sqrt(1.0 + R[0][0] - R[1][1] - R[2][2]) * 2;
        qw = (R[2][1] - R[1][2]) / s;
        qx = 0.25 * s;
        qy = (R[0][1] + R[1][0]) / s;
        qz = (R[0][2] + R[2][0]) / s;
    } else if (R[1][1] > R[2][2]) {
        Real s = std::sqrt(1.0 + R[1][1] - R[0][0] - R[2][2]) * 2;
        qw = (R[0][2] - R[2][0]) / s;
        qx = (R[0][1] + R[1][0]) / s;
        qy = 0.25 * s;
        qz = (R[1][2] + R[2][1]) / s;
    } else {
        Real s = std::sqrt(1.0 + R[2][2] - R[0][0] - R[1][1]) * 2;
        qw = (R[1][0] - R[0][1]) / s;
        qx = (R[0][2] + R[2][0]) / s;
        qy = (R[1][2] + R[2][1]) / s;
        qz = 0.25 * s;
    }
}

std::vector<Camera> synth_cameras(const SynthOptions& opts, const AnalyticShape& shape) {
    const int W = opts.resolution;
    const Real dist = 4.0 * shape.bounding_radius;
    // focal length such that the silhouette covers ~ (1 - sky_fraction) of the frame
    Real cover = std::clamp(1.0 - opts.sky_fraction, 0.05, 0.95);
    Real tan_theta = shape.bounding_radius /
                     std::sqrt(std::max(dist * dist - shape.bounding_radius *
                                                          shape.bounding_radius,
                                        1e-9));
    Real f = Real(W) * std::sqrt(cover / kPi) / tan_theta;

    std::vector<Camera> cams;
    for (int v = 0; v < opts.n_views; ++v) {
        Real azim = 2.0 * kPi * v / opts.n_views;
        Real elev = (v % 2 == 0 ? 1.0 : -1.0) * (kPi / 12.0) * (1.0 + (v % 3) * 0.5);
        Vec3 pos{dist * std::cos(azim) * std::cos(elev),
                 dist * std::sin(azim) * std::cos(elev), dist * std::sin(elev)};
        Vec3 fwd = (-pos).normalized();
        Vec3 up{0, 0, 1};
        Vec3 right = fwd.cross(up).normalized();
        Vec3 down = fwd.cross(right).normalized();

        Camera cam;
        cam.width = cam.height = W;
        cam.fx = cam.fy = f;
        cam.cx = cam.cy = W / 2.0;
        for (int i = 0; i < 3; ++i) {
            cam.rotation[0][i] = right[i];
            cam.rotation[1][i] = down[i];
            cam.rotation[2][i] = fwd[i];
        }
        for (int i = 0; i < 3; ++i)
            cam.translation[i] = -(cam.rotation[i][0] * pos.x + cam.rotation[i][1] * pos.y +
                                   cam.rotation[i][2] * pos.z);
        cams.push_back(cam);
    }
    return cams;
}

namespace {

struct ShadeParams {
    Vec3 light = Vec3{0.4, 0.3, 0.85}.normalized();
    Real checker = 0.15;
};

Vec3 albedo_at(const Vec3& p, const ShadeParams& sp) {
    int64_t c = int64_t(std::floor(p.x / sp.checker)) + int64_t(std::floor(p.y / sp.checker)) +
                int64_t(std::floor(p.z / sp.checker));
    return (c & 1) ? Vec3{0.2, 0.45, 0.85} : Vec3{0.85, 0.35, 0.25};
}

// Sphere-traces the SDF; nullopt on miss.
std::optional<Real> march(const AnalyticShape& shape, const Ray& ray, Real t_max) {
    Real t = 0;
    for (int i = 0; i < 512 && t < t_max; ++i) {
        Real d = shape.sdf(ray.at(t));
        if (d < 1e-7) return t;
        t += std::max(d, 1e-6);
    }
    return std::nullopt;
}

}  // namespace

void synth_scene(const SynthOptions& opts) {
    if (opts.n_views < 2) throw UsageError("synth: need at least 2 views");
    AnalyticShape shape = make_shape(opts.shape);
    Rng rng(opts.seed);
    std::uniform_real_distribution<Real> u01(0.0, 1.0);

    fs::create_directories(fs::path(opts.out_dir) / "images");
    fs::create_directories(fs::path(opts.out_dir) / "masks");

    std::vector<Camera> cams = synth_cameras(opts, shape);
    ShadeParams sp;
    const int W = opts.resolution;
    const Real t_max = 10.0 * shape.bounding_radius;

    // per-image appearance tints (the stand-in for illumination variation)
    std::vector<Vec3> tints(cams.size(), {1, 1, 1});
    for (auto& t : tints)
        for (int c = 0; c < 3; ++c)
            t[c] = std::clamp(1.0 + opts.tint_strength * (2 * u01(rng) - 1), 0.1, 2.0);

    std::ofstream images_txt(fs::path(opts.out_dir) / "images.txt");
    images_txt << "# IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME\n";
    std::ofstream cameras_txt(fs::path(opts.out_dir) / "cameras.txt");
    cameras_txt << "# CAMERA_ID MODEL WIDTH HEIGHT PARAMS\n";

    char name[64];
    for (size_t v = 0; v < cams.size(); ++v) {
        const Camera& cam = cams[v];
        ImageU8 img;
        img.width = img.height = W;
        img.channels = 3;
        img.pixels.resize(size_t(W) * W * 3);
        ImageU8 sky;
        sky.width = sky.height = W;
        sky.channels = 1;
        sky.pixels.assign(size_t(W) * W, 0);

        for (int y = 0; y < W; ++y)
            for (int x = 0; x < W; ++x) {
                Ray ray = pixel_ray(cam, x + 0.5, y + 0.5);
                auto hit = march(shape, ray, t_max);
                Vec3 rgb;
                if (hit) {
                    Vec3 p = ray.at(*hit);
                    Vec3 n = shape_normal(shape, p);
                    Real shade = 0.25 + 0.75 * std::max(0.0, n.dot(sp.light));
                    Vec3 alb = albedo_at(p, sp);
                    rgb = {alb.x * shade, alb.y * shade, alb.z * shade};
                } else {
                    rgb = {0.55, 0.7, 0.95};
                    sky.pixels[size_t(y) * W + x] = 255;
                }
                for (int c = 0; c < 3; ++c)
                    img.pixels[(size_t(y) * W + x) * 3 + size_t(c)] = uint8_t(
                        std::clamp(rgb[c] * tints[v][c], 0.0, 1.0) * 255.0 + 0.5);
            }

        std::snprintf(name, sizeof(name), "img_%03zu", v);
        save_png((fs::path(opts.out_dir) / "images" / (std::string(name) + ".png")).string(),
                 img);
        save_png(
            (fs::path(opts.out_dir) / "masks" / (std::string(name) + "_sky.png")).string(),
            sky);

        cameras_txt << (v + 1) << " PINHOLE " << W << ' ' << W << ' ' << cam.fx << ' '
                    << cam.fy << ' ' << cam.cx << ' ' << cam.cy << "\n";
        Real qw, qx, qy, qz;
        rotation_to_quat(cam.rotation, qw, qx, qy, qz);
        char line[256];
        std::snprintf(line, sizeof(line), "%zu %.17g %.17g %.17g %.17g %.17g %.17g %.17g %zu %s.png\n",
                      v + 1, qw, qx, qy, qz, cam.translation.x, cam.translation.y,
                      cam.translation.z, v + 1, name);
        images_txt << line << "\n";  // empty observations line
    }

    // surface samples standing in for the SfM sparse cloud
    std::ofstream points_txt(fs::path(opts.out_dir) / "points3D.txt");
    points_txt << "# POINT3D_ID X Y Z R G B ERROR TRACK[] as (IMAGE_ID POINT2D_IDX)\n";
    std::vector<Vec3> surface = sample_shape_surface(shape, size_t(opts.n_sfm_points), rng);
    std::uniform_int_distribution<int> track_len(3, 9);
    for (size_t i = 0; i < surface.size(); ++i) {
        const Vec3& p = surface[i];
        Vec3 alb = albedo_at(p, sp);
        int track = track_len(rng);
        char line[512];
        int off = std::snprintf(line, sizeof(line), "%zu %.17g %.17g %.17g %d %d %d %.5f",
                                i + 1, p.x, p.y, p.z, int(alb.x * 255), int(alb.y * 255),
                                int(alb.z * 255), 0.3 + 0.9 * u01(rng));
        for (int t = 0; t < track; ++t)
            off += std::snprintf(line + off, sizeof(line) - size_t(off), " %d %d",
                                 1 + int(rng() % cams.size()), t);
        points_txt << line << "\n";
    }
    // a few spurious far points with short tracks; the track filter drops them
    for (int i = 0; i < opts.n_sfm_points / 50 + 1; ++i) {
        Vec3 p{4 + u01(rng), 4 + u01(rng), 4 + u01(rng)};
        points_txt << (surface.size() + size_t(i) + 1) << ' ' << p.x << ' ' << p.y << ' '
                   << p.z << " 128 128 128 " << 3.0 + u01(rng) << " 1 0 2 0\n";
    }

    // ground truth: exact surface point cloud + a fine mesh
    std::vector<Vec3> gt_points = sample_shape_surface(shape, size_t(opts.n_gt_points), rng);
    PointCloud gt_cloud;
    gt_cloud.points = gt_points;
    save_ply((fs::path(opts.out_dir) / "gt_points.ply").string(), gt_cloud);

    SparseVoxelGrid gt_grid = dilate(voxelize_points(gt_points, 0.1), 1);
    SdfBatchFn sdf_fn = [&shape](std::span<const Vec3> pts, std::span<Real> out) {
        for (size_t i = 0; i < pts.size(); ++i) out[i] = shape.sdf(pts[i]);
    };
    TriMesh gt_mesh = marching_cubes(sdf_fn, gt_grid, 10);
    save_ply((fs::path(opts.out_dir) / "gt_mesh.ply").string(), gt_mesh);

    // desk-scale config sized to the scene
    SceneConfig cfg;
    cfg.voxel_size = 0.08;
    cfg.octree_depth = 6;
    cfg.n_v = 8;
    cfg.n_s = 8;
    cfg.dilation_radius = 1;
    cfg.sphere_radius = 3.0 * shape.bounding_radius;
    cfg.schedule.bootstrap_iters = 1000;
    cfg.schedule.total_iters = 4000;
    cfg.schedule.batch_size = 128;
    cfg.schedule.cache_refresh_period = 500;
    cfg.schedule.checkpoint_period = 2000;
    cfg.schedule.lr = 1e-3;
    cfg.schedule.seed = opts.seed;
    cfg.field.pos_freqs = 6;
    cfg.field.dir_freqs = 2;
    cfg.field.geometry_layers = 4;
    cfg.field.geometry_width = 64;
    cfg.field.geometry_skip = -1;
    cfg.field.color_layers = 3;
    cfg.field.color_width = 64;
    cfg.field.feature_dim = 32;
    cfg.field.embed_dim = 8;
    cfg.scene_dir = opts.out_dir;
    save_scene_config((fs::path(opts.out_dir) / "config.json").string(), cfg);
}

}  // namespace recon
