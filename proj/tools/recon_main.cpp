#include <omp.h>

#include <Eigen/Core>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "recon/bench.hpp"
#include "recon/config.hpp"
#include "recon/field.hpp"
#include "recon/meshing.hpp"
#include "recon/ply.hpp"
#include "recon/sampling.hpp"
#include "recon/synth.hpp"
#include "recon/trainer.hpp"

namespace fs = std::filesystem;
using namespace recon;

namespace {

void set_threads(int threads) {
    if (threads < 1) threads = 1;
    omp_set_num_threads(threads);
    Eigen::setNbThreads(threads);
}

SceneConfig config_for_scene(const std::string& scene_dir, const std::string& config_path) {
    std::string path = config_path;
    if (path.empty()) {
        path = (fs::path(scene_dir) / "config.json").string();
        if (!fs::exists(path))
            throw UsageError("no --config given and " + path + " does not exist");
    }
    SceneConfig cfg = load_scene_config(path);
    if (!scene_dir.empty()) cfg.scene_dir = scene_dir;
    return cfg;
}

std::vector<Vec3> load_points_for_eval(const std::string& path, Real density,
                                        uint64_t seed) {
    PlyData ply = load_ply(path);
    if (ply.has_faces()) {
        TriMesh mesh = ply.as_mesh();
        Real d = density;
        if (d <= 0) {
            Real area = mesh.area();
            d = area > 0 ? 2e5 / area : 1e4;  // ~200k samples regardless of scale
        }
        return sample_mesh_points(mesh, d, seed).points;
    }
    return ply.cloud.points;
}

int run(int argc, char** argv) {
    CLI::App app{"neural SDF surface reconstruction engine"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 1;
    app.add_option("--threads", threads, "worker threads (1 = deterministic mode)");

    // --- synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic test scene");
    SynthOptions sopts;
    synth->add_option("--shape", sopts.shape, "sphere | box | two-spheres");
    synth->add_option("--views", sopts.n_views, "number of views")->check(CLI::Range(2, 512));
    synth->add_option("--resolution", sopts.resolution, "image resolution");
    synth->add_option("--tint", sopts.tint_strength, "per-image tint strength");
    synth->add_option("--sky-fraction", sopts.sky_fraction, "approximate sky fraction");
    synth->add_option("--seed", sopts.seed, "rng seed");
    synth->add_option("--points", sopts.n_sfm_points, "synthetic SfM point count");
    synth->add_option("--gt-points", sopts.n_gt_points, "ground-truth sample count");
    synth->add_option("--out", sopts.out_dir, "output scene directory")->required();

    // --- train
    auto* train_cmd = app.add_subcommand("train", "optimize the neural field");
    std::string t_scene, t_config, t_out, t_strategy = "hybrid";
    int64_t t_seed = -1;
    int t_iters = -1;
    train_cmd->add_option("--scene", t_scene, "scene directory")->required();
    train_cmd->add_option("--config", t_config, "scene config JSON");
    train_cmd->add_option("--out", t_out, "output directory")->required();
    train_cmd->add_option("--strategy", t_strategy, "sphere | voxel | hybrid");
    train_cmd->add_option("--iters", t_iters, "override total iterations");
    train_cmd->add_option("--seed", t_seed, "override rng seed");

    // --- mesh
    auto* mesh_cmd = app.add_subcommand("mesh", "extract a mesh from a checkpoint");
    std::string m_ckpt, m_scene, m_out;
    int m_cpv = 8;
    mesh_cmd->add_option("--checkpoint", m_ckpt, "checkpoint file")->required();
    mesh_cmd->add_option("--scene", m_scene, "scene directory (for the SfM envelope)")
        ->required();
    mesh_cmd->add_option("--out", m_out, "output PLY")->required();
    mesh_cmd->add_option("--cells-per-voxel", m_cpv, "lattice cells per voxel");

    // --- eval
    auto* eval_cmd = app.add_subcommand("eval", "benchmark a reconstruction");
    std::string e_pred, e_gt, e_out, e_visref;
    Real e_density = 0, e_ladder_max = 0, e_vis_voxel = 0;
    int e_ladder_steps = 200, e_vis_dilation = 1;
    bool e_icp = false;
    uint64_t e_seed = 0;
    eval_cmd->add_option("--pred", e_pred, "predicted mesh/cloud PLY")->required();
    eval_cmd->add_option("--gt", e_gt, "ground-truth cloud PLY")->required();
    eval_cmd->add_option("--out", e_out, "write the JSON report here");
    eval_cmd->add_option("--density", e_density, "mesh sampling density (points/area)");
    eval_cmd->add_option("--ladder-max", e_ladder_max, "threshold ladder upper end");
    eval_cmd->add_option("--ladder-steps", e_ladder_steps, "threshold ladder rungs");
    eval_cmd->add_flag("--icp", e_icp, "ICP-align pred to gt first");
    eval_cmd->add_option("--visibility-ref", e_visref, "SfM reference PLY for visibility");
    eval_cmd->add_option("--visibility-voxel", e_vis_voxel, "visibility voxel size");
    eval_cmd->add_option("--visibility-dilation", e_vis_dilation, "visibility dilation");
    eval_cmd->add_option("--seed", e_seed, "mesh sampling seed");

    // --- align
    auto* align_cmd = app.add_subcommand("align", "ICP registration of two clouds");
    std::string a_src, a_dst, a_out, a_json;
    IcpParams a_params;
    align_cmd->add_option("--source", a_src, "source PLY")->required();
    align_cmd->add_option("--target", a_dst, "target PLY")->required();
    align_cmd->add_option("--max-iters", a_params.max_iterations, "ICP iterations");
    align_cmd->add_option("--cutoff", a_params.correspondence_cutoff,
                          "correspondence cutoff (0 = 5x median)");
    align_cmd->add_option("--eps", a_params.convergence_eps, "convergence epsilon");
    align_cmd->add_option("--out", a_out, "write the transformed source PLY");
    align_cmd->add_option("--json", a_json, "write the transform as JSON");

    // --- sample-viz
    auto* viz_cmd = app.add_subcommand("sample-viz", "export hybrid samples as PLY");
    std::string v_scene, v_ckpt, v_out;
    int v_rays = 256;
    uint64_t v_seed = 0;
    viz_cmd->add_option("--scene", v_scene, "scene directory")->required();
    viz_cmd->add_option("--checkpoint", v_ckpt, "checkpoint file")->required();
    viz_cmd->add_option("--out", v_out, "output PLY")->required();
    viz_cmd->add_option("--rays", v_rays, "number of rays");
    viz_cmd->add_option("--seed", v_seed, "rng seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    set_threads(threads);

    if (*synth) {
        synth_scene(sopts);
        std::printf("wrote synthetic scene to %s\n", sopts.out_dir.c_str());
        return 0;
    }

    if (*train_cmd) {
        SceneConfig cfg = config_for_scene(t_scene, t_config);
        if (t_seed >= 0) cfg.schedule.seed = uint64_t(t_seed);
        Scene scene = load_scene(cfg);
        TrainOptions opts;
        opts.out_dir = t_out;
        opts.deterministic = threads == 1;
        opts.override_total_iters = t_iters;
        TrainResult res = train(cfg, scene, strategy_from_name(t_strategy), opts);
        std::printf("log: %s\nfinal checkpoint: %s\n", res.log_path.c_str(),
                    res.final_checkpoint.c_str());
        return 0;
    }

    if (*mesh_cmd) {
        Checkpoint ckpt = load_checkpoint(m_ckpt);
        NeuralField field = field_from_checkpoint(ckpt);
        SceneConfig cfg = scene_config_from_json(ckpt.config_json);
        cfg.scene_dir = m_scene;
        ColmapScene colmap = load_colmap_scene(m_scene);
        auto points = filter_sfm_points(colmap.points, cfg.sfm_filter.min_track_len,
                                        cfg.sfm_filter.max_reproj);
        std::vector<Vec3> pts(points.size());
        for (size_t i = 0; i < pts.size(); ++i) pts[i] = points[i].position;
        SparseVoxelGrid grid =
            dilate(voxelize_points(pts, cfg.voxel_size), cfg.dilation_radius);
        TriMesh mesh = marching_cubes(field.sdf_fn(), grid, m_cpv);
        save_ply(m_out, mesh);
        std::printf("mesh: %zu vertices, %zu triangles -> %s\n", mesh.vertices.size(),
                    mesh.triangles.size(), m_out.c_str());
        return 0;
    }

    if (*eval_cmd) {
        std::vector<Vec3> pred = load_points_for_eval(e_pred, e_density, e_seed);
        std::vector<Vec3> gt = load_points_for_eval(e_gt, e_density, e_seed + 1);
        if (pred.empty() || gt.empty()) throw DataError("eval: empty input cloud");
        if (!e_visref.empty()) {
            if (e_vis_voxel <= 0)
                throw UsageError("eval: --visibility-voxel required with --visibility-ref");
            std::vector<Vec3> ref = load_points_for_eval(e_visref, e_density, e_seed + 2);
            gt = visibility_filter(ref, gt, e_vis_voxel, e_vis_dilation);
            if (gt.empty()) throw DataError("eval: visibility filter removed every point");
        }
        if (e_icp) {
            IcpResult icp = icp_align(pred, gt);
            pred = icp.transform.apply(pred);
            std::printf("icp rmse: %.6g\n", icp.rmse);
        }
        EvalParams params;
        params.ladder_max = e_ladder_max;
        params.ladder_steps = e_ladder_steps;
        EvalReport report = evaluate_reconstruction(pred, gt, params);
        std::printf("%s", report_table(report).c_str());
        if (!e_out.empty()) {
            std::ofstream out(e_out);
            out << report_to_json(report) << "\n";
        }
        return 0;
    }

    if (*align_cmd) {
        PlyData src = load_ply(a_src), dst = load_ply(a_dst);
        IcpResult res = icp_align(src.cloud.points, dst.cloud.points, a_params);
        std::printf("iterations: %d  rmse: %.9g\n", res.iterations, res.rmse);
        std::printf("rotation:\n");
        for (int i = 0; i < 3; ++i)
            std::printf("  %12.9f %12.9f %12.9f\n", res.transform.rotation(i, 0),
                        res.transform.rotation(i, 1), res.transform.rotation(i, 2));
        std::printf("translation: %.9f %.9f %.9f\n", res.transform.translation.x(),
                    res.transform.translation.y(), res.transform.translation.z());
        if (!a_out.empty()) {
            PointCloud moved;
            moved.points = res.transform.apply(src.cloud.points);
            save_ply(a_out, moved);
        }
        if (!a_json.empty()) {
            std::ofstream out(a_json);
            out << "{\n  \"rmse\": " << res.rmse << ",\n  \"rotation\": [";
            for (int i = 0; i < 9; ++i)
                out << res.transform.rotation(i / 3, i % 3) << (i < 8 ? ", " : "");
            out << "],\n  \"translation\": [" << res.transform.translation.x() << ", "
                << res.transform.translation.y() << ", " << res.transform.translation.z()
                << "]\n}\n";
        }
        return 0;
    }

    if (*viz_cmd) {
        Checkpoint ckpt = load_checkpoint(v_ckpt);
        NeuralField field = field_from_checkpoint(ckpt);
        SceneConfig cfg = scene_config_from_json(ckpt.config_json);
        cfg.scene_dir = v_scene;
        Scene scene = load_scene(cfg);

        SdfCache cache;
        cache.octree = build_octree(scene.grid, cfg.octree_depth);
        refresh_cache(cache, field.sdf_fn(), 0);

        SamplingConfig sc;
        sc.n_v = cfg.n_v;
        sc.n_s = cfg.n_s;
        sc.t_s = cfg.t_s();
        sc.merge_eps = 1e-7 * scene.extent;
        Rng rng(v_seed);
        RayBatch batch = make_batch(scene, scene.grid, v_rays, rng);

        PointCloud cloud;
        for (const auto& rec : batch.rays) {
            RaySamples s = hybrid_sample(rec.ray, scene.grid, cache, sc, &rng);
            for (size_t i = 0; i < s.size(); ++i) {
                cloud.points.push_back(rec.ray.at(s.t[i]));
                cloud.stages.push_back(s.stage[i]);
            }
        }
        save_ply(v_out, cloud);
        std::printf("wrote %zu samples (%d rays) -> %s\n", cloud.points.size(), v_rays,
                    v_out.c_str());
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
