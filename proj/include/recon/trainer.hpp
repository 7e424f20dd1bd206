#pragma once

#include "recon/config.hpp"
#include "recon/core.hpp"
#include "recon/field.hpp"
#include "recon/geometry.hpp"
#include "recon/renderer.hpp"
#include "recon/sampling.hpp"
#include "recon/scene_io.hpp"

namespace recon {

// --- losses ------------------------------------------------------------------

// mean |rendered - target| over rays and channels (both 3xN)
Real color_loss(const Mat& rendered, const Mat& target);
// mean (|grad| - 1)^2 over columns of a 3xN gradient matrix
Real eikonal_loss(const Mat& grads);
// binary cross-entropy of sky-ray opacities against target 0,
// inputs clamped to [1e-5, 1 - 1e-5]
Real mask_loss(const Vec& opacities);

// --- scene -------------------------------------------------------------------

struct Scene {
    std::vector<ImageRecord> images;
    std::vector<SfmPoint> points;  // after track/reprojection filtering
    SparseVoxelGrid grid;          // dilated V_sfm
    Vec3 center;
    Real extent = 1.0;             // diagonal of the occupied bounds
};

// COLMAP dir + images + masks -> filtered points -> dilated voxel grid.
Scene load_scene(const SceneConfig& cfg);
// Grid/extent assembly for tests that build images/points directly.
void finalize_scene(Scene& scene, const SceneConfig& cfg);

// --- batches -----------------------------------------------------------------

struct RayRecord {
    Ray ray;
    Real target[3] = {0, 0, 0};
    int image_index = 0;
    bool sky = false;
};

struct RayBatch {
    std::vector<RayRecord> rays;  // transient pixels already excluded
    Real kept_fraction = 0;       // kept / drawn during assembly
};

RayBatch make_batch(const Scene& scene, const SparseVoxelGrid& grid, int batch_size,
                    Rng& rng);

// A batch with frozen sample positions; the loss below is differentiable in
// the parameters with the samples held fixed.
struct FixedBatch {
    std::vector<RayRecord> meta;
    std::vector<RaySamples> samples;  // parallel to meta; may be empty per ray
    Real kept_fraction = 0;
};

struct LossTerms {
    Real color = 0, eikonal = 0, mask = 0, total = 0;
};

// --- training state ------------------------------------------------------------

struct AdamState {
    struct Slot {
        Mat m, v;
    };
    std::vector<Slot> slots;  // parallel to the field tensor registry
    Slot rho;
    int64_t t = 0;
    Real beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct TrainState {
    SceneConfig cfg;
    Strategy strategy = Strategy::Hybrid;
    NeuralField field;
    LogisticDensity density;
    SdfCache cache;
    SamplingConfig sampling;
    AdamState adam;
    int64_t iteration = 0;
    Rng rng;

    // strategy actually used at an iteration: the first bootstrap_iters
    // iterations run a sparse (n_v-sample) stratum of the same strategy,
    // except hybrid, which bootstraps with voxel-guided sampling
    Strategy phase_strategy(int64_t iter) const;
    bool in_bootstrap(int64_t iter) const {
        return iter < cfg.schedule.bootstrap_iters;
    }
};

TrainState init_train_state(const SceneConfig& cfg, const Scene& scene,
                            Strategy strategy);

// Draws per-ray samples with the current strategy (jitter on when rng given).
FixedBatch sample_batch(const TrainState& state, const Scene& scene,
                        const RayBatch& batch, Rng* rng);

// Full differentiable pipeline over frozen samples. Gradients are optional;
// rho_grad receives d(total)/d(density.rho).
LossTerms loss_on_fixed_batch(const NeuralField& field, const LogisticDensity& density,
                              const LossWeights& weights, const FixedBatch& batch,
                              FieldGradients* grads, Real* rho_grad);

struct StepStats {
    LossTerms loss;
    Real kept_fraction = 0;
    Strategy strategy_used = Strategy::Hybrid;
};

// One optimizer step: sampling, loss, backward, Adam, cache refresh on
// schedule. Throws NumericalError (with a diagnostic batch dump) on a
// non-finite loss.
StepStats train_step(TrainState& state, const Scene& scene);

// --- full loop -----------------------------------------------------------------

struct TrainOptions {
    std::string out_dir;
    bool deterministic = false;  // zero the wall-clock column of the log
    int override_total_iters = -1;
};

struct TrainResult {
    std::vector<std::string> checkpoint_paths;
    std::string log_path;
    std::string final_checkpoint;
};

TrainResult train(const SceneConfig& cfg, const Scene& scene, Strategy strategy,
                  const TrainOptions& opts);

// Adam with cosine learning-rate decay over the full schedule.
void adam_step(TrainState& state, const FieldGradients& grads, Real rho_grad);

Checkpoint make_checkpoint(const TrainState& state);
void restore_from_checkpoint(TrainState& state, const Checkpoint& ckpt);

}  // namespace recon
