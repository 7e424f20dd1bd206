#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "recon/renderer.hpp"

using namespace recon;

TEST_CASE("logistic_cdf values, saturation, symmetry") {
    CHECK(logistic_cdf(0.0, 17.0) == 0.5);
    CHECK(logistic_cdf(10.0, 500.0) == 1.0);
    CHECK(logistic_cdf(-10.0, 500.0) == 0.0);
    CHECK(std::isfinite(logistic_cdf(1e6, 500.0)));
    CHECK(std::isfinite(logistic_cdf(-1e6, 500.0)));

    Rng rng(3);
    std::uniform_real_distribution<Real> u(-5, 5);
    for (int i = 0; i < 10000; ++i) {
        Real x = u(rng);
        CHECK(logistic_cdf(x, 30.0) + logistic_cdf(-x, 30.0) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("alphas_from_sdf basics") {
    Vec d(3);
    d << 0.5, 0.5, 0.5;
    Vec a = alphas_from_sdf(d, 10.0);
    CHECK(a(0) == 0.0);
    CHECK(a(1) == 0.0);

    // hard-surface limit: + to - crossing with huge sharpness
    d.resize(2);
    d << 0.01, -0.01;
    CHECK(alphas_from_sdf(d, 1e5)(0) == doctest::Approx(1.0).epsilon(1e-9));

    // increasing SDF would give negative raw alpha; the clamp keeps it at 0
    d << -0.2, 0.3;
    CHECK(alphas_from_sdf(d, 50.0)(0) == 0.0);
}

TEST_CASE("alpha and weight ranges on random SDF sequences") {
    Rng rng(11);
    std::uniform_real_distribution<Real> u(-1, 1);
    std::uniform_int_distribution<int> len(2, 40);
    for (int trial = 0; trial < 2000; ++trial) {
        int n = len(rng);
        Vec d(n);
        for (int i = 0; i < n; ++i) d(i) = u(rng);
        Real sigma = std::exp(u(rng) * 4 + 2);
        Vec alpha = alphas_from_sdf(d, sigma);
        for (int i = 0; i < n - 1; ++i) {
            CHECK(alpha(i) >= 0.0);
            CHECK(alpha(i) <= 1.0);
        }
        Vec t = Vec::LinSpaced(n - 1, 0.1, 1.0);
        RenderOutput out = composite(alpha, Mat::Ones(3, n - 1) * 0.5, t);
        CHECK(out.weights.minCoeff() >= 0.0);
        CHECK(out.weights.sum() <= 1.0 + 1e-6);
        // closed form: sum w = 1 - prod(1 - alpha)
        Real prod = 1;
        for (int i = 0; i < n - 1; ++i) prod *= (1.0 - alpha(i));
        CHECK(out.weights.sum() == doctest::Approx(1.0 - prod).epsilon(1e-9));
        CHECK(out.opacity == doctest::Approx(out.weights.sum()));
        if (out.opacity > 0) CHECK(out.depth >= 0);
    }
}

TEST_CASE("composite occlusion") {
    Vec alpha(3);
    alpha << 1.0, 0.7, 0.3;
    Mat colors(3, 3);
    colors << 1, 0, 0, 0, 1, 0, 0, 0, 1;  // c0 = red
    Vec t(3);
    t << 1, 2, 3;
    RenderOutput out = composite(alpha, colors, t);
    CHECK(out.weights(0) == 1.0);
    CHECK(out.weights(1) == 0.0);
    CHECK(out.weights(2) == 0.0);
    CHECK(out.color(0) == 1.0);
    CHECK(out.depth == 1.0);

    alpha.setZero();
    out = composite(alpha, colors, t);
    CHECK(out.color.norm() == 0.0);
    CHECK(out.opacity == 0.0);
}

TEST_CASE("weight argmax brackets a linear SDF zero crossing") {
    // linear SDF with a single crossing inside section k: argmax weight = k
    Rng rng(7);
    std::uniform_real_distribution<Real> u(0.0, 1.0);
    for (Real sigma : {8.0, 16.0, 64.0, 256.0}) {
        for (int trial = 0; trial < 300; ++trial) {
            int n = 12;
            Real t0 = u(rng), dt = 0.05 + 0.1 * u(rng);
            Real slope = -(0.5 + u(rng));                  // constant negative slope
            Real cross = t0 + dt * (1 + u(rng) * (n - 2));  // inside the sample range
            Vec t(n), d(n);
            for (int i = 0; i < n; ++i) {
                t(i) = t0 + i * dt;
                d(i) = slope * (t(i) - cross);
            }
            int expect = -1;
            for (int i = 0; i + 1 < n; ++i)
                if (d(i) > 0 && d(i + 1) <= 0) expect = i;
            if (expect < 0) continue;
            Vec alpha = alphas_from_sdf(d, sigma);
            RenderOutput out = composite(alpha, Mat::Ones(3, n - 1) * 0.5,
                                         t.segment(0, n - 1));
            int argmax = 0;
            out.weights.maxCoeff(&argmax);
            CHECK(argmax == expect);
        }
    }
}

TEST_CASE("renderer gradients match central differences") {
    Rng rng(19);
    std::uniform_real_distribution<Real> u(-0.4, 0.4);
    const int n = 7;
    Vec d(n);
    for (int i = 0; i < n; ++i) d(i) = u(rng);
    std::sort(d.data(), d.data() + n, std::greater<Real>());  // decreasing, one crossing
    Mat colors = (Mat::Random(3, n - 1).array() * 0.4 + 0.5).matrix();
    Vec t = Vec::LinSpaced(n - 1, 0.2, 1.4);
    Real sigma = 12.0;

    // scalar pipeline: L = |color|^2 + depth^2 + opacity^2
    auto loss_of = [&](const Vec& dd, const Mat& cc, Real ss) {
        RenderOutput out = composite(alphas_from_sdf(dd, ss), cc, t);
        return out.color.squaredNorm() + out.depth * out.depth + out.opacity * out.opacity;
    };

    RenderOutput out = composite(alphas_from_sdf(d, sigma), colors, t);
    Vec alpha = alphas_from_sdf(d, sigma);
    Vec alpha_bar;
    Mat colors_bar;
    composite_backward(alpha, colors, t, 2.0 * out.color, 2.0 * out.depth,
                       2.0 * out.opacity, alpha_bar, colors_bar);
    Vec d_bar;
    Real sigma_bar = 0;
    alphas_backward(d, sigma, alpha_bar, d_bar, sigma_bar);

    const Real h = 1e-6;
    for (int i = 0; i < n; ++i) {
        Vec dp = d, dm = d;
        dp(i) += h;
        dm(i) -= h;
        Real fd = (loss_of(dp, colors, sigma) - loss_of(dm, colors, sigma)) / (2 * h);
        CHECK(std::abs(fd - d_bar(i)) / std::max({1.0, std::abs(fd)}) <= 1e-4);
    }
    for (int i = 0; i < 3 * (n - 1); ++i) {
        Mat cp = colors, cm = colors;
        cp(i % 3, i / 3) += h;
        cm(i % 3, i / 3) -= h;
        Real fd = (loss_of(d, cp, sigma) - loss_of(d, cm, sigma)) / (2 * h);
        CHECK(std::abs(fd - colors_bar(i % 3, i / 3)) / std::max({1.0, std::abs(fd)}) <=
              1e-4);
    }
    Real fd = (loss_of(d, colors, sigma + h) - loss_of(d, colors, sigma - h)) / (2 * h);
    CHECK(std::abs(fd - sigma_bar) / std::max({1.0, std::abs(fd)}) <= 1e-4);
}

TEST_CASE("argmax weight brackets the analytic sphere crossing from dense samples") {
    // ray through a unit sphere: SDF along the ray is |o + t v| - 1
    Vec3 o{-2, 0.1, -0.05};
    Vec3 v = Vec3{1, 0, 0};
    const int n = 48;
    Vec t = Vec::LinSpaced(n, 0.2, 3.8), d(n);
    for (int i = 0; i < n; ++i) d(i) = (o + v * t(i)).norm() - 1.0;
    Real t_true = 0;  // first analytic intersection
    {
        Real b = o.dot(v), c = o.squared_norm() - 1;
        t_true = -b - std::sqrt(b * b - c);
    }
    for (Real sigma : {64.0, 256.0, 1024.0}) {
        Vec alpha = alphas_from_sdf(d, sigma);
        RenderOutput out = composite(alpha, Mat::Ones(3, n - 1) * 0.5, t.segment(0, n - 1));
        int argmax = 0;
        out.weights.maxCoeff(&argmax);
        CHECK(t(argmax) <= t_true + 1e-12);
        CHECK(t(argmax + 1) >= t_true - 1e-12);
    }
}

TEST_CASE("ray profile dump writes a plottable CSV") {
    namespace fs = std::filesystem;
    Vec d(4);
    d << 0.3, 0.1, -0.1, -0.3;
    Vec t(4);
    t << 1, 2, 3, 4;
    Vec alpha = alphas_from_sdf(d, 32.0);
    Vec w = composite(alpha, Mat::Ones(3, 3) * 0.5, t.segment(0, 3)).weights;
    fs::path path = fs::temp_directory_path() / "recon_profile.csv";
    dump_ray_profile(path.string(), t, d, alpha, w);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,d,alpha,w");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 4);
}
