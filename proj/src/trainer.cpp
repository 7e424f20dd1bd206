#include "recon/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace recon {

Real color_loss(const Mat& rendered, const Mat& target) {
    if (rendered.rows() != target.rows() || rendered.cols() != target.cols())
        throw DataError("color_loss: shape mismatch");
    if (rendered.size() == 0) return 0;
    return (rendered - target).array().abs().mean();
}

Real eikonal_loss(const Mat& grads) {
    if (grads.size() == 0) return 0;
    Real sum = 0;
    for (Eigen::Index c = 0; c < grads.cols(); ++c) {
        Real n = grads.col(c).norm();
        sum += (n - 1.0) * (n - 1.0);
    }
    return sum / Real(grads.cols());
}

Real mask_loss(const Vec& opacities) {
    if (opacities.size() == 0) return 0;
    Real sum = 0;
    for (Eigen::Index i = 0; i < opacities.size(); ++i) {
        Real o = std::clamp(opacities(i), 1e-5, 1.0 - 1e-5);
        sum += -std::log(1.0 - o);
    }
    return sum / Real(opacities.size());
}

Scene load_scene(const SceneConfig& cfg) {
    Scene scene;
    ColmapScene colmap = load_colmap_scene(cfg.scene_dir);
    load_images_and_masks(cfg.scene_dir, colmap.images);
    scene.images = std::move(colmap.images);
    scene.points = filter_sfm_points(colmap.points, cfg.sfm_filter.min_track_len,
                                     cfg.sfm_filter.max_reproj);
    if (scene.points.empty()) throw DataError("scene: no SfM points survive filtering");
    finalize_scene(scene, cfg);
    return scene;
}

void finalize_scene(Scene& scene, const SceneConfig& cfg) {
    std::vector<Vec3> pts(scene.points.size());
    for (size_t i = 0; i < pts.size(); ++i) pts[i] = scene.points[i].position;
    scene.grid = dilate(voxelize_points(pts, cfg.voxel_size), cfg.dilation_radius);
    Aabb bounds = scene.grid.occupied_bounds();
    scene.center = bounds.center();
    scene.extent = bounds.extent().norm();
}

RayBatch make_batch(const Scene& scene, const SparseVoxelGrid& grid, int batch_size,
                    Rng& rng) {
    RayBatch batch;
    batch.rays.reserve(size_t(batch_size));
    std::uniform_int_distribution<size_t> pick_image(0, scene.images.size() - 1);

    size_t drawn = 0;
    size_t pruned_in = 0, pruned_kept = 0;
    const size_t max_draws = size_t(batch_size) * 1000 + 1000;

    std::vector<Ray> chunk_rays;
    std::vector<uint8_t> chunk_sky;
    std::vector<RayRecord> chunk_meta;
    while (batch.rays.size() < size_t(batch_size)) {
        if (drawn > max_draws)
            throw DataError("make_batch: batch unattainable, all pixels masked or pruned");
        chunk_rays.clear();
        chunk_sky.clear();
        chunk_meta.clear();
        size_t want = size_t(batch_size) - batch.rays.size();
        for (size_t i = 0; i < want * 2; ++i) {
            const ImageRecord& img = scene.images[pick_image(rng)];
            std::uniform_int_distribution<int> px(0, img.camera.width - 1);
            std::uniform_int_distribution<int> py(0, img.camera.height - 1);
            int x = px(rng), y = py(rng);
            ++drawn;
            if (img.is_transient(x, y)) continue;
            RayRecord rec;
            rec.ray = pixel_ray(img.camera, x + 0.5, y + 0.5);
            img.target_color(x, y, rec.target);
            rec.image_index = img.appearance_index;
            rec.sky = img.is_sky(x, y);
            chunk_rays.push_back(rec.ray);
            chunk_sky.push_back(rec.sky ? 1 : 0);
            chunk_meta.push_back(rec);
        }
        PruneResult pruned = prune_rays(chunk_rays, grid, chunk_sky);
        pruned_in += chunk_rays.size();
        pruned_kept += pruned.kept.size();
        for (uint32_t idx : pruned.kept) {
            if (batch.rays.size() >= size_t(batch_size)) break;
            batch.rays.push_back(chunk_meta[idx]);
        }
    }
    batch.kept_fraction = pruned_in > 0 ? Real(pruned_kept) / Real(pruned_in) : 0;
    return batch;
}

Strategy TrainState::phase_strategy(int64_t iter) const {
    if (strategy == Strategy::Hybrid && in_bootstrap(iter)) return Strategy::Voxel;
    return strategy;
}

TrainState init_train_state(const SceneConfig& cfg, const Scene& scene,
                            Strategy strategy) {
    TrainState st;
    st.cfg = cfg;
    st.strategy = strategy;
    st.field = NeuralField(cfg.field, int(scene.images.size()), 0.25 * scene.extent,
                           cfg.schedule.seed);
    Real sigma0 = cfg.field.sigma_inv_init > 0 ? cfg.field.sigma_inv_init
                                               : 20.0 / scene.extent;
    st.density = LogisticDensity::from_sigma_inv(sigma0);
    st.cache.octree = build_octree(scene.grid, cfg.octree_depth);
    st.cache.refresh_period = cfg.schedule.cache_refresh_period;

    st.sampling.strategy = strategy;
    st.sampling.n_v = cfg.n_v;
    st.sampling.n_s = cfg.n_s;
    st.sampling.t_s = cfg.t_s();
    st.sampling.jitter = true;
    st.sampling.merge_eps = 1e-7 * scene.extent;
    Aabb bounds = scene.grid.occupied_bounds();
    st.sampling.sphere_center = bounds.center();
    st.sampling.sphere_radius =
        cfg.sphere_radius > 0 ? cfg.sphere_radius : 0.5 * bounds.extent().norm();

    auto tensors = st.field.named_tensors();
    st.adam.slots.resize(tensors.size());
    for (size_t i = 0; i < tensors.size(); ++i) {
        st.adam.slots[i].m = Mat::Zero(tensors[i].second->rows(), tensors[i].second->cols());
        st.adam.slots[i].v = st.adam.slots[i].m;
    }
    st.adam.rho.m = Mat::Zero(1, 1);
    st.adam.rho.v = Mat::Zero(1, 1);
    st.rng = Rng(cfg.schedule.seed + 0x5eed);
    return st;
}

FixedBatch sample_batch(const TrainState& state, const Scene& scene,
                        const RayBatch& batch, Rng* rng) {
    FixedBatch out;
    out.meta = batch.rays;
    out.kept_fraction = batch.kept_fraction;
    out.samples.resize(batch.rays.size());

    Strategy strat = state.phase_strategy(state.iteration);
    bool bootstrap = state.in_bootstrap(state.iteration);
    const SamplingConfig& sc = state.sampling;
    int n_total = bootstrap ? sc.n_v : sc.samples_per_ray();

    for (size_t i = 0; i < batch.rays.size(); ++i) {
        const Ray& ray = batch.rays[i].ray;
        switch (strat) {
            case Strategy::Sphere:
                out.samples[i] =
                    sphere_sample(ray, n_total, sc.sphere_radius, sc.sphere_center, rng);
                break;
            case Strategy::Voxel:
                out.samples[i] = voxel_guided_sample(ray, scene.grid, n_total, rng);
                break;
            case Strategy::Hybrid:
                out.samples[i] = hybrid_sample(ray, scene.grid, state.cache, sc, rng);
                break;
        }
        out.samples[i].ray = ray;
    }
    return out;
}

LossTerms loss_on_fixed_batch(const NeuralField& field, const LogisticDensity& density,
                              const LossWeights& weights, const FixedBatch& batch,
                              FieldGradients* grads, Real* rho_grad) {
    const size_t n_rays = batch.meta.size();
    const Real sigma_inv = density.sigma_inv();

    // flatten sample points and section midpoints
    std::vector<size_t> s_off(n_rays + 1, 0), m_off(n_rays + 1, 0);
    for (size_t r = 0; r < n_rays; ++r) {
        size_t n = batch.samples[r].size();
        size_t usable = n >= 2 ? n : 0;
        s_off[r + 1] = s_off[r] + usable;
        m_off[r + 1] = m_off[r] + (usable ? usable - 1 : 0);
    }
    const size_t ns = s_off[n_rays], nm = m_off[n_rays];

    Mat xs(3, ns), xm(3, nm), dirs(3, nm);
    Vec tmid_all(nm);
    std::vector<int> img_of_mid(nm);
    for (size_t r = 0; r < n_rays; ++r) {
        const auto& s = batch.samples[r];
        if (s.size() < 2) continue;
        const Ray& ray = batch.meta[r].ray;
        for (size_t i = 0; i < s.size(); ++i) {
            Vec3 p = ray.at(s.t[i]);
            xs.col(Eigen::Index(s_off[r] + i)) << p.x, p.y, p.z;
        }
        for (size_t i = 0; i + 1 < s.size(); ++i) {
            Real tm = 0.5 * (s.t[i] + s.t[i + 1]);
            Vec3 p = ray.at(tm);
            Eigen::Index c = Eigen::Index(m_off[r] + i);
            xm.col(c) << p.x, p.y, p.z;
            dirs.col(c) << ray.direction.x, ray.direction.y, ray.direction.z;
            tmid_all(c) = tm;
            img_of_mid[size_t(c)] = batch.meta[r].image_index;
        }
    }

    LossTerms terms;
    if (ns == 0) return terms;  // nothing usable in the batch

    auto fw_s = field.geom_forward(xs, false, false);
    auto fw_m = field.geom_forward(xm, true, true);
    auto fw_c = field.color_forward(xm, dirs, fw_m.grad, fw_m.feat, img_of_mid);

    // per-ray rendering
    size_t n_color = 0, n_mask = 0;
    for (size_t r = 0; r < n_rays; ++r) {
        if (batch.meta[r].sky) ++n_mask;
        else if (s_off[r + 1] > s_off[r]) ++n_color;
    }

    Vec d_s_bar = Vec::Zero(ns);
    Mat rgb_bar = Mat::Zero(3, nm);
    Real sigma_bar = 0;
    Real color_sum = 0, mask_sum = 0;

    for (size_t r = 0; r < n_rays; ++r) {
        size_t n = s_off[r + 1] - s_off[r];
        if (n == 0) {
            if (batch.meta[r].sky) mask_sum += -std::log(1.0 - 1e-5);  // opacity 0
            continue;
        }
        size_t m = n - 1;
        Vec d = fw_s.sdf.segment(Eigen::Index(s_off[r]), Eigen::Index(n));
        Vec alpha = alphas_from_sdf(d, sigma_inv);
        Mat colors = fw_c.rgb.middleCols(Eigen::Index(m_off[r]), Eigen::Index(m));
        Vec tm = tmid_all.segment(Eigen::Index(m_off[r]), Eigen::Index(m));
        RenderOutput ro = composite(alpha, colors, tm);

        Eigen::Vector3d color_bar_ray = Eigen::Vector3d::Zero();
        Real opacity_bar = 0;
        if (batch.meta[r].sky) {
            Real o = std::clamp(ro.opacity, 1e-5, 1.0 - 1e-5);
            mask_sum += -std::log(1.0 - o);
            if (grads && ro.opacity > 1e-5 && ro.opacity < 1.0 - 1e-5)
                opacity_bar = weights.mask / ((1.0 - o) * Real(n_mask));
        } else {
            const Real* t = batch.meta[r].target;
            for (int c = 0; c < 3; ++c) {
                Real diff = ro.color(c) - t[c];
                color_sum += std::abs(diff);
                if (grads)
                    color_bar_ray(c) = weights.color * (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0)) /
                                       (3.0 * Real(n_color));
            }
        }

        if (grads && (opacity_bar != 0 || color_bar_ray.squaredNorm() > 0)) {
            Vec alpha_bar;
            Mat colors_bar;
            composite_backward(alpha, colors, tm, color_bar_ray, 0.0, opacity_bar,
                               alpha_bar, colors_bar);
            rgb_bar.middleCols(Eigen::Index(m_off[r]), Eigen::Index(m)) += colors_bar;
            Vec d_bar_ray;
            alphas_backward(d, sigma_inv, alpha_bar, d_bar_ray, sigma_bar);
            d_s_bar.segment(Eigen::Index(s_off[r]), Eigen::Index(n)) += d_bar_ray;
        }
    }

    terms.color = n_color > 0 ? color_sum / (3.0 * Real(n_color)) : 0.0;
    terms.mask = n_mask > 0 ? mask_sum / Real(n_mask) : 0.0;

    // eikonal over all section midpoints
    Real eik_sum = 0;
    Mat g_bar = Mat::Zero(3, nm);
    for (Eigen::Index c = 0; c < Eigen::Index(nm); ++c) {
        Real norm = fw_m.grad.col(c).norm();
        eik_sum += (norm - 1.0) * (norm - 1.0);
        if (grads && norm > 0)
            g_bar.col(c) = weights.eikonal * 2.0 * (norm - 1.0) / (norm * Real(nm)) *
                           fw_m.grad.col(c);
    }
    terms.eikonal = nm > 0 ? eik_sum / Real(nm) : 0.0;
    terms.total = weights.color * terms.color + weights.eikonal * terms.eikonal +
                  weights.mask * terms.mask;

    if (grads) {
        Mat feat_bar;
        field.color_backward(fw_c, rgb_bar, g_bar, feat_bar, *grads);
        field.geom_backward(fw_m, Vec::Zero(nm), feat_bar, g_bar, *grads);
        field.geom_backward(fw_s, d_s_bar, Mat(), Mat(), *grads);
        if (rho_grad) *rho_grad += sigma_bar * sigma_inv;  // d sigma / d rho = sigma
    }
    return terms;
}

void adam_step(TrainState& state, const FieldGradients& grads, Real rho_grad) {
    auto& adam = state.adam;
    adam.t += 1;
    const auto& sch = state.cfg.schedule;
    Real lr_min = sch.lr * sch.lr_final_scale;
    Real progress = sch.total_iters > 0
                        ? std::min(Real(state.iteration) / Real(sch.total_iters), 1.0)
                        : 0.0;
    Real lr = lr_min + 0.5 * (sch.lr - lr_min) *
                           (1.0 + std::cos(progress * std::numbers::pi_v<Real>));
    Real bc1 = 1.0 - std::pow(adam.beta1, Real(adam.t));
    Real bc2 = 1.0 - std::pow(adam.beta2, Real(adam.t));

    auto update = [&](Mat& param, const Mat& g, AdamState::Slot& slot) {
        slot.m = adam.beta1 * slot.m + (1.0 - adam.beta1) * g;
        slot.v = adam.beta2 * slot.v.array().matrix() +
                 (1.0 - adam.beta2) * g.array().square().matrix();
        Mat mhat = slot.m / bc1;
        Mat vhat = slot.v / bc2;
        param.array() -= lr * mhat.array() / (vhat.array().sqrt() + adam.eps);
    };

    auto tensors = state.field.named_tensors();
    auto grad_of = [&](const std::string& name) -> const Mat* {
        if (name.rfind("geom.w", 0) == 0) return &grads.geom_w[size_t(std::stoi(name.substr(6)))];
        if (name.rfind("geom.b", 0) == 0) return &grads.geom_b[size_t(std::stoi(name.substr(6)))];
        if (name.rfind("color.w", 0) == 0) return &grads.color_w[size_t(std::stoi(name.substr(7)))];
        if (name.rfind("color.b", 0) == 0) return &grads.color_b[size_t(std::stoi(name.substr(7)))];
        return &grads.embed;
    };
    for (size_t i = 0; i < tensors.size(); ++i)
        update(*tensors[i].second, *grad_of(tensors[i].first), adam.slots[i]);

    lr *= sch.sigma_lr_scale;
    Mat rho_param(1, 1), rho_g(1, 1);
    rho_param(0, 0) = state.density.rho;
    rho_g(0, 0) = rho_grad;
    update(rho_param, rho_g, adam.rho);
    state.density.rho = rho_param(0, 0);
}

namespace {

void dump_bad_batch(const FixedBatch& batch, const std::string& path) {
    std::ofstream out(path);
    out << "ray,ox,oy,oz,dx,dy,dz,sky,image,n_samples\n";
    for (size_t r = 0; r < batch.meta.size(); ++r) {
        const auto& m = batch.meta[r];
        out << r << ',' << m.ray.origin.x << ',' << m.ray.origin.y << ',' << m.ray.origin.z
            << ',' << m.ray.direction.x << ',' << m.ray.direction.y << ','
            << m.ray.direction.z << ',' << int(m.sky) << ',' << m.image_index << ','
            << batch.samples[r].size() << '\n';
    }
}

}  // namespace

StepStats train_step(TrainState& state, const Scene& scene) {
    bool needs_cache = state.strategy == Strategy::Hybrid &&
                       !state.in_bootstrap(state.iteration);
    if (needs_cache) {
        // forced refresh at the bootstrap boundary, periodic afterwards
        bool boundary = state.iteration == state.cfg.schedule.bootstrap_iters;
        if (boundary || state.cache.due(state.iteration))
            refresh_cache(state.cache, state.field.sdf_fn(), state.iteration);
    }

    RayBatch batch = make_batch(scene, scene.grid, state.cfg.schedule.batch_size, state.rng);
    FixedBatch fixed = sample_batch(state, scene, batch, &state.rng);

    FieldGradients grads = state.field.zero_gradients();
    Real rho_grad = 0;
    LossTerms terms = loss_on_fixed_batch(state.field, state.density, state.cfg.loss,
                                          fixed, &grads, &rho_grad);
    if (!std::isfinite(terms.total)) {
        std::string dump = (fs::path(state.cfg.out_dir.empty() ? "." : state.cfg.out_dir) /
                            ("bad_batch_" + std::to_string(state.iteration) + ".csv"))
                               .string();
        dump_bad_batch(fixed, dump);
        throw NumericalError("train_step: non-finite loss at iteration " +
                             std::to_string(state.iteration) + ", batch dumped to " + dump);
    }
    adam_step(state, grads, rho_grad);

    StepStats stats;
    stats.loss = terms;
    stats.kept_fraction = fixed.kept_fraction;
    stats.strategy_used = state.phase_strategy(state.iteration);
    state.iteration += 1;
    return stats;
}

Checkpoint make_checkpoint(const TrainState& state) {
    Checkpoint ckpt;
    ckpt.iteration = state.iteration;
    ckpt.config_json = scene_config_to_json(state.cfg);
    for (const auto& [name, m] : state.field.named_tensors())
        ckpt.tensors.emplace_back(name, *m);
    Mat rho(1, 1);
    rho(0, 0) = state.density.rho;
    ckpt.tensors.emplace_back("sigma.rho", rho);
    return ckpt;
}

void restore_from_checkpoint(TrainState& state, const Checkpoint& ckpt) {
    for (auto& [name, dst] : state.field.named_tensors()) {
        const Mat* src = ckpt.find(name);
        if (!src) throw DataError("checkpoint: missing tensor " + name);
        *dst = *src;
    }
    if (const Mat* rho = ckpt.find("sigma.rho")) state.density.rho = (*rho)(0, 0);
    state.iteration = ckpt.iteration;
}

TrainResult train(const SceneConfig& cfg, const Scene& scene, Strategy strategy,
                  const TrainOptions& opts) {
    SceneConfig run_cfg = cfg;
    if (opts.override_total_iters >= 0) {
        run_cfg.schedule.total_iters = opts.override_total_iters;
        run_cfg.schedule.bootstrap_iters =
            std::min(run_cfg.schedule.bootstrap_iters, run_cfg.schedule.total_iters);
    }
    if (!opts.out_dir.empty()) {
        run_cfg.out_dir = opts.out_dir;
        fs::create_directories(opts.out_dir);
    }

    TrainState state = init_train_state(run_cfg, scene, strategy);

    TrainResult result;
    fs::path out(run_cfg.out_dir.empty() ? "." : run_cfg.out_dir);
    result.log_path = (out / "train_log.csv").string();
    std::ofstream log(result.log_path);
    if (!log) throw DataError("train: cannot write " + result.log_path);
    log << "iteration,seconds,loss_color,loss_eikonal,loss_mask,loss_total,"
           "kept_fraction,strategy\n";

    auto t0 = std::chrono::steady_clock::now();
    auto save = [&](int64_t iter) {
        std::string path = (out / ("checkpoint_" + std::to_string(iter) + ".ckpt")).string();
        save_checkpoint(path, make_checkpoint(state));
        result.checkpoint_paths.push_back(path);
        return path;
    };

    char row[256];
    for (int64_t iter = 0; iter < run_cfg.schedule.total_iters; ++iter) {
        StepStats stats = train_step(state, scene);
        Real seconds =
            opts.deterministic
                ? 0.0
                : std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
        std::snprintf(row, sizeof(row), "%lld,%.3f,%.9g,%.9g,%.9g,%.9g,%.6f,%s\n",
                      (long long)iter, seconds, stats.loss.color, stats.loss.eikonal,
                      stats.loss.mask, stats.loss.total, stats.kept_fraction,
                      strategy_name(stats.strategy_used));
        log << row;
        if (run_cfg.schedule.checkpoint_period > 0 && iter > 0 &&
            iter % run_cfg.schedule.checkpoint_period == 0)
            save(iter);
    }
    result.final_checkpoint = save(run_cfg.schedule.total_iters);
    return result;
}

}  // namespace recon
