#include "doctest.h"

#include <filesystem>
#include <random>

#include "recon/synth.hpp"
#include "recon/trainer.hpp"

using namespace recon;
namespace fs = std::filesystem;

namespace {

// tiny on-disk synthetic scene, loaded through the real pipeline
struct TinyScene {
    SceneConfig cfg;
    Scene scene;

    explicit TinyScene(int views = 2, int res = 8, uint64_t seed = 5) {
        fs::path dir = fs::temp_directory_path() /
                       ("recon_trainer_" + std::to_string(views) + "_" +
                        std::to_string(res) + "_" + std::to_string(seed));
        fs::remove_all(dir);
        SynthOptions opts;
        opts.n_views = views;
        opts.resolution = res;
        opts.seed = seed;
        opts.n_sfm_points = 400;
        opts.n_gt_points = 500;
        opts.out_dir = dir.string();
        synth_scene(opts);
        cfg = load_scene_config((dir / "config.json").string());
        cfg.scene_dir = dir.string();
        cfg.field.geometry_layers = 2;
        cfg.field.geometry_width = 12;
        cfg.field.geometry_skip = -1;
        cfg.field.color_layers = 2;
        cfg.field.color_width = 10;
        cfg.field.feature_dim = 5;
        cfg.field.embed_dim = 3;
        cfg.field.pos_freqs = 2;
        cfg.field.dir_freqs = 1;
        cfg.schedule.batch_size = 24;
        cfg.schedule.seed = seed;
        scene = load_scene(cfg);
    }
};

}  // namespace

TEST_CASE("loss terms match their direct formulas") {
    // color: mean |diff|
    Mat rendered = Mat::Zero(3, 4), target = Mat::Ones(3, 4);
    CHECK(color_loss(rendered, rendered) == 0.0);
    CHECK(color_loss(rendered, target) == 1.0);
    Rng rng(3);
    rendered = Mat::Random(3, 10);
    target = Mat::Random(3, 10);
    CHECK(color_loss(rendered, target) ==
          doctest::Approx((rendered - target).cwiseAbs().mean()).epsilon(1e-15));

    // eikonal: plane SDF gradient -> 0; zero gradient -> 1
    Mat plane = Mat::Zero(3, 5);
    plane.row(2).setOnes();
    CHECK(eikonal_loss(plane) == 0.0);
    CHECK(eikonal_loss(Mat::Zero(3, 7)) == 1.0);
    Mat g = Mat::Random(3, 20);
    Real expect = 0;
    for (int c = 0; c < 20; ++c) {
        Real n = g.col(c).norm();
        expect += (n - 1) * (n - 1) / 20.0;
    }
    CHECK(eikonal_loss(g) == doctest::Approx(expect).epsilon(1e-12));

    // mask: BCE toward zero opacity with clamped inputs
    Vec zero = Vec::Zero(3);
    CHECK(mask_loss(zero) == doctest::Approx(-std::log(1.0 - 1e-5)).epsilon(1e-9));
    Vec one = Vec::Ones(2);
    CHECK(mask_loss(one) == doctest::Approx(-std::log(1e-5)).epsilon(1e-9));
    CHECK(std::isfinite(mask_loss(one)));
    Rng rng2(5);
    std::uniform_real_distribution<Real> u01(0.0, 1.0);
    Vec o(50);
    for (int i = 0; i < 50; ++i) o(i) = u01(rng2);
    Real bce = 0;
    for (int i = 0; i < 50; ++i)
        bce += -std::log(1.0 - std::clamp(o(i), 1e-5, 1.0 - 1e-5)) / 50.0;
    CHECK(mask_loss(o) == doctest::Approx(bce).epsilon(1e-12));
}

TEST_CASE("make_batch: transient pixels never enter; sky proportion matches oracle") {
    TinyScene tiny(3, 24, 9);
    // paint the first image fully transient
    auto& img0 = tiny.scene.images[0];
    img0.transient.assign(size_t(img0.camera.width * img0.camera.height), 1);

    Rng rng(42);
    RayBatch batch = make_batch(tiny.scene, tiny.scene.grid, 2000, rng);
    for (const auto& r : batch.rays) CHECK(r.image_index != 0);

    // per-pixel oracle over the remaining images
    size_t oracle_sky = 0, oracle_total = 0;
    for (size_t v = 1; v < tiny.scene.images.size(); ++v) {
        const auto& img = tiny.scene.images[v];
        for (int y = 0; y < img.camera.height; ++y)
            for (int x = 0; x < img.camera.width; ++x) {
                bool sky = img.is_sky(x, y);
                Ray ray = pixel_ray(img.camera, x + 0.5, y + 0.5);
                bool hit = ray_grid_intersect(ray, tiny.scene.grid).has_value();
                if (sky || hit) {
                    ++oracle_total;
                    oracle_sky += sky;
                }
            }
    }
    Real oracle_ratio = Real(oracle_sky) / Real(oracle_total);

    RayBatch big = make_batch(tiny.scene, tiny.scene.grid, 100000, rng);
    size_t got_sky = 0;
    for (const auto& r : big.rays) got_sky += r.sky;
    Real got_ratio = Real(got_sky) / Real(big.rays.size());
    CHECK(std::abs(got_ratio - oracle_ratio) < 0.02);

    // full transient masking everywhere -> batch unattainable
    for (auto& img : tiny.scene.images)
        img.transient.assign(size_t(img.camera.width * img.camera.height), 1);
    CHECK_THROWS_AS(make_batch(tiny.scene, tiny.scene.grid, 16, rng), DataError);
}

TEST_CASE("strategy schedule switches exactly at the bootstrap boundary") {
    TinyScene tiny;
    SceneConfig cfg = tiny.cfg;
    cfg.schedule.bootstrap_iters = 5000;
    cfg.schedule.total_iters = 8000;
    TrainState st = init_train_state(cfg, tiny.scene, Strategy::Hybrid);
    CHECK(st.phase_strategy(0) == Strategy::Voxel);
    CHECK(st.phase_strategy(4999) == Strategy::Voxel);
    CHECK(st.phase_strategy(5000) == Strategy::Hybrid);
    CHECK(st.in_bootstrap(4999));
    CHECK(!st.in_bootstrap(5000));

    TrainState sphere = init_train_state(cfg, tiny.scene, Strategy::Sphere);
    CHECK(sphere.phase_strategy(0) == Strategy::Sphere);
    CHECK(sphere.phase_strategy(7000) == Strategy::Sphere);
}

TEST_CASE("total-loss gradients match finite differences on a tiny scene") {
    TinyScene tiny;
    TrainState st = init_train_state(tiny.cfg, tiny.scene, Strategy::Voxel);

    Rng rng(17);
    RayBatch batch = make_batch(tiny.scene, tiny.scene.grid, 12, rng);
    FixedBatch fixed = sample_batch(st, tiny.scene, batch, nullptr);

    FieldGradients grads = st.field.zero_gradients();
    Real rho_grad = 0;
    loss_on_fixed_batch(st.field, st.density, st.cfg.loss, fixed, &grads, &rho_grad);

    auto loss_at = [&]() {
        return loss_on_fixed_batch(st.field, st.density, st.cfg.loss, fixed, nullptr,
                                   nullptr)
            .total;
    };
    auto grad_of = [&](const std::string& n) -> Mat* {
        if (n.rfind("geom.w", 0) == 0) return &grads.geom_w[size_t(std::stoi(n.substr(6)))];
        if (n.rfind("geom.b", 0) == 0) return &grads.geom_b[size_t(std::stoi(n.substr(6)))];
        if (n.rfind("color.w", 0) == 0)
            return &grads.color_w[size_t(std::stoi(n.substr(7)))];
        if (n.rfind("color.b", 0) == 0)
            return &grads.color_b[size_t(std::stoi(n.substr(7)))];
        return &grads.embed;
    };

    Rng pick(23);
    const Real h = 1e-6;
    int checked = 0;
    for (auto& [name, m] : st.field.named_tensors()) {
        for (int trial = 0; trial < 8; ++trial) {
            Eigen::Index r = Eigen::Index(pick() % uint64_t(m->rows()));
            Eigen::Index c = Eigen::Index(pick() % uint64_t(m->cols()));
            Real orig = (*m)(r, c);
            (*m)(r, c) = orig + h;
            Real lp = loss_at();
            (*m)(r, c) = orig - h;
            Real lm = loss_at();
            (*m)(r, c) = orig;
            Real fd = (lp - lm) / (2 * h);
            Real an = (*grad_of(name))(r, c);
            Real rel = std::abs(fd - an) / std::max({1e-4, std::abs(fd), std::abs(an)});
            CHECK(rel <= 1e-4);
            ++checked;
        }
    }
    CHECK(checked > 50);

    // sharpness scalar
    Real orig = st.density.rho;
    st.density.rho = orig + h;
    Real lp = loss_at();
    st.density.rho = orig - h;
    Real lm = loss_at();
    st.density.rho = orig;
    Real fd = (lp - lm) / (2 * h);
    CHECK(std::abs(fd - rho_grad) / std::max({1e-4, std::abs(fd)}) <= 1e-4);
}

TEST_CASE("overfitting a fixed batch decreases the color loss") {
    TinyScene tiny;
    SceneConfig cfg = tiny.cfg;
    cfg.loss.eikonal = 0.0;
    cfg.loss.mask = 0.0;
    cfg.schedule.lr = 1.5e-3;
    cfg.schedule.lr_final_scale = 1.0;  // constant rate
    cfg.schedule.total_iters = 100;
    TrainState st = init_train_state(cfg, tiny.scene, Strategy::Voxel);

    Rng rng(31);
    RayBatch batch = make_batch(tiny.scene, tiny.scene.grid, 4, rng);
    // keep only one non-sky ray
    for (auto& r : batch.rays)
        if (!r.sky) {
            batch.rays = {r};
            break;
        }
    REQUIRE(batch.rays.size() == 1);
    FixedBatch fixed = sample_batch(st, tiny.scene, batch, nullptr);

    std::vector<Real> trace;
    for (int step = 0; step < 100; ++step) {
        FieldGradients grads = st.field.zero_gradients();
        Real rho_grad = 0;
        LossTerms terms =
            loss_on_fixed_batch(st.field, st.density, cfg.loss, fixed, &grads, &rho_grad);
        trace.push_back(terms.color);
        adam_step(st, grads, rho_grad);
        st.iteration += 1;
    }
    CHECK(trace.back() < 0.25 * trace.front());
    // allow small Adam oscillations; the trend must be downward throughout
    for (size_t i = 20; i < trace.size(); i += 20)
        CHECK(trace[i] < trace[i - 20]);
}

TEST_CASE("zero learning rate leaves the state unchanged") {
    TinyScene tiny;
    SceneConfig cfg = tiny.cfg;
    cfg.schedule.lr = 0.0;
    cfg.schedule.lr_final_scale = 0.0;
    TrainState st = init_train_state(cfg, tiny.scene, Strategy::Voxel);
    std::vector<Mat> before;
    for (auto& [name, m] : st.field.named_tensors()) before.push_back(*m);
    Real rho_before = st.density.rho;
    train_step(st, tiny.scene);
    size_t i = 0;
    for (auto& [name, m] : st.field.named_tensors()) CHECK(*m == before[i++]);
    CHECK(st.density.rho == rho_before);
    CHECK(st.iteration == 1);
}

TEST_CASE("transient pixels contribute nothing: perturbing them changes no loss") {
    TinyScene a(2, 12, 13), b(2, 12, 13);
    // mark one pixel transient in both copies; corrupt its color only in b
    for (auto* t : {&a, &b}) {
        auto& img = t->scene.images[0];
        img.transient.assign(size_t(img.camera.width * img.camera.height), 0);
        img.transient[5] = 1;
    }
    b.scene.images[0].rgb[5 * 3 + 0] = 0.0;
    b.scene.images[0].rgb[5 * 3 + 1] = 1.0;

    SceneConfig cfg = a.cfg;
    cfg.schedule.total_iters = 3;
    TrainState sa = init_train_state(cfg, a.scene, Strategy::Voxel);
    TrainState sb = init_train_state(cfg, b.scene, Strategy::Voxel);
    for (int i = 0; i < 3; ++i) {
        StepStats ra = train_step(sa, a.scene);
        StepStats rb = train_step(sb, b.scene);
        CHECK(ra.loss.total == rb.loss.total);  // bitwise: identical rng, identical rays
    }
}

TEST_CASE("fixed seed reproduces the loss trajectory bitwise") {
    TinyScene tiny;
    SceneConfig cfg = tiny.cfg;
    cfg.schedule.total_iters = 4;
    std::vector<Real> first;
    for (int run = 0; run < 2; ++run) {
        TrainState st = init_train_state(cfg, tiny.scene, Strategy::Hybrid);
        std::vector<Real> trace;
        for (int i = 0; i < 4; ++i) trace.push_back(train_step(st, tiny.scene).loss.total);
        if (run == 0) first = trace;
        else
            for (size_t i = 0; i < 4; ++i) CHECK(trace[i] == first[i]);
    }
}

TEST_CASE("checkpoint round-trip restores the training state") {
    TinyScene tiny;
    TrainState st = init_train_state(tiny.cfg, tiny.scene, Strategy::Voxel);
    for (int i = 0; i < 2; ++i) train_step(st, tiny.scene);

    fs::path path = fs::temp_directory_path() / "recon_trainer.ckpt";
    save_checkpoint(path.string(), make_checkpoint(st));
    Checkpoint back = load_checkpoint(path.string());

    TrainState st2 = init_train_state(tiny.cfg, tiny.scene, Strategy::Voxel);
    restore_from_checkpoint(st2, back);
    CHECK(st2.iteration == st.iteration);
    CHECK(st2.density.rho == st.density.rho);
    auto ta = st.field.named_tensors();
    auto tb = st2.field.named_tensors();
    for (size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i].second == *tb[i].second);
}

TEST_CASE("non-finite loss raises NumericalError and dumps the batch") {
    TinyScene tiny;
    SceneConfig cfg = tiny.cfg;
    fs::path dump_dir = fs::temp_directory_path() / "recon_dump_test";
    fs::remove_all(dump_dir);
    fs::create_directories(dump_dir);
    cfg.out_dir = dump_dir.string();
    TrainState st = init_train_state(cfg, tiny.scene, Strategy::Voxel);
    auto tensors = st.field.named_tensors();
    (*tensors[0].second)(0, 0) = std::numeric_limits<Real>::quiet_NaN();
    CHECK_THROWS_AS(train_step(st, tiny.scene), NumericalError);
    bool dumped = false;
    for (const auto& e : fs::directory_iterator(dump_dir))
        dumped = dumped || e.path().filename().string().rfind("bad_batch_", 0) == 0;
    CHECK(dumped);
}

TEST_CASE("box and two-spheres shapes train end to end") {
    for (const char* shape : {"box", "two-spheres"}) {
        fs::path dir = fs::temp_directory_path() / (std::string("recon_shape_") + shape);
        fs::remove_all(dir);
        SynthOptions opts;
        opts.shape = shape;
        opts.n_views = 3;
        opts.resolution = 12;
        opts.seed = 4;
        opts.n_sfm_points = 400;
        opts.n_gt_points = 400;
        opts.out_dir = dir.string();
        synth_scene(opts);
        SceneConfig cfg = load_scene_config((dir / "config.json").string());
        cfg.scene_dir = dir.string();
        cfg.field.geometry_layers = 2;
        cfg.field.geometry_width = 8;
        cfg.field.geometry_skip = -1;
        cfg.field.color_layers = 2;
        cfg.field.color_width = 8;
        cfg.field.feature_dim = 4;
        cfg.field.embed_dim = 2;
        cfg.field.pos_freqs = 2;
        cfg.field.dir_freqs = 1;
        cfg.schedule.batch_size = 16;
        Scene scene = load_scene(cfg);
        TrainState st = init_train_state(cfg, scene, Strategy::Hybrid);
        for (int i = 0; i < 2; ++i) {
            StepStats stats = train_step(st, scene);
            CHECK(std::isfinite(stats.loss.total));
        }
    }
    CHECK_THROWS_AS(make_shape("torus"), UsageError);
}

TEST_CASE("surface samplers emit exact on-surface points") {
    Rng rng(6);
    for (const char* tag : {"sphere", "box", "two-spheres"}) {
        AnalyticShape shape = make_shape(tag);
        auto pts = sample_shape_surface(shape, 500, rng);
        for (const auto& p : pts) CHECK(std::abs(shape.sdf(p)) < 1e-9);
        if (std::string(tag) == "sphere")
            for (const auto& p : pts) CHECK(std::abs(p.norm() - 0.5) < 1e-12);
    }
}
