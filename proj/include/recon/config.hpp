#pragma once

#include <cstdint>
#include <string>

#include "recon/core.hpp"

namespace recon {

struct LossWeights {
    Real color = 1.0;
    Real eikonal = 0.1;
    Real mask = 0.01;  // kept small: sky masks are imperfect
};

struct TrainSchedule {
    int bootstrap_iters = 5000;  // voxel-guided only until here
    int total_iters = 8000;
    int batch_size = 1024;
    int cache_refresh_period = 2000;
    int checkpoint_period = 2000;
    Real lr = 5e-4;
    Real lr_final_scale = 0.05;  // cosine decay floor, as a fraction of lr
    Real sigma_lr_scale = 10.0;  // extra rate on the sharpness scalar
    uint64_t seed = 0;
};

struct FieldSpecConfig {
    int pos_freqs = 10;
    int dir_freqs = 4;
    bool include_identity = true;
    int geometry_layers = 8;
    int geometry_width = 512;
    int geometry_skip = 4;  // <0: no skip connection
    int color_layers = 4;
    int color_width = 256;
    int feature_dim = 256;
    int embed_dim = 48;
    Real sigma_inv_init = 0;  // <=0: use the 20 / scene-extent rule
};

struct SfmFilterConfig {
    int min_track_len = 3;   // non-paper default
    Real max_reproj = 1.5;   // px, non-paper default
};

struct SceneConfig {
    Real voxel_size = 1.0;   // s
    int octree_depth = 10;   // l
    int n_v = 8;
    int n_s = 8;
    bool has_t_s_override = false;
    Real t_s_override = 0;
    int dilation_radius = 1;
    Real sphere_radius = 0;  // <=0: derived from the voxel grid extent

    LossWeights loss;
    TrainSchedule schedule;
    FieldSpecConfig field;
    SfmFilterConfig sfm_filter;

    std::string scene_dir;
    std::string out_dir;

    // t_s = (16 / 2^l) * s unless overridden; ldexp keeps the product exact.
    Real t_s() const {
        return has_t_s_override ? t_s_override : std::ldexp(voxel_size, 4 - octree_depth);
    }
};

SceneConfig load_scene_config(const std::string& path);
void save_scene_config(const std::string& path, const SceneConfig& cfg);
std::string scene_config_to_json(const SceneConfig& cfg);
SceneConfig scene_config_from_json(const std::string& text);

}  // namespace recon
