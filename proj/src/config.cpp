#include "recon/config.hpp"

#include <fstream>

#include "json.hpp"

using nlohmann::json;

namespace recon {

namespace {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string scene_config_to_json(const SceneConfig& c) {
    json j;
    j["voxel_size"] = c.voxel_size;
    j["octree_depth"] = c.octree_depth;
    j["n_v"] = c.n_v;
    j["n_s"] = c.n_s;
    if (c.has_t_s_override) j["t_s"] = c.t_s_override;
    j["dilation_radius"] = c.dilation_radius;
    j["sphere_radius"] = c.sphere_radius;
    j["loss"] = {{"color", c.loss.color}, {"eikonal", c.loss.eikonal}, {"mask", c.loss.mask}};
    j["schedule"] = {{"bootstrap_iters", c.schedule.bootstrap_iters},
                     {"total_iters", c.schedule.total_iters},
                     {"batch_size", c.schedule.batch_size},
                     {"cache_refresh_period", c.schedule.cache_refresh_period},
                     {"checkpoint_period", c.schedule.checkpoint_period},
                     {"lr", c.schedule.lr},
                     {"lr_final_scale", c.schedule.lr_final_scale},
                     {"sigma_lr_scale", c.schedule.sigma_lr_scale},
                     {"seed", c.schedule.seed}};
    j["field"] = {{"pos_freqs", c.field.pos_freqs},
                  {"dir_freqs", c.field.dir_freqs},
                  {"include_identity", c.field.include_identity},
                  {"geometry_layers", c.field.geometry_layers},
                  {"geometry_width", c.field.geometry_width},
                  {"geometry_skip", c.field.geometry_skip},
                  {"color_layers", c.field.color_layers},
                  {"color_width", c.field.color_width},
                  {"feature_dim", c.field.feature_dim},
                  {"embed_dim", c.field.embed_dim},
                  {"sigma_inv_init", c.field.sigma_inv_init}};
    j["sfm_filter"] = {{"min_track_len", c.sfm_filter.min_track_len},
                       {"max_reproj", c.sfm_filter.max_reproj}};
    j["paths"] = {{"scene_dir", c.scene_dir}, {"out_dir", c.out_dir}};
    return j.dump(2);
}

SceneConfig scene_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("config: invalid JSON: ") + e.what());
    }
    SceneConfig c;
    get_if(j, "voxel_size", c.voxel_size);
    get_if(j, "octree_depth", c.octree_depth);
    get_if(j, "n_v", c.n_v);
    get_if(j, "n_s", c.n_s);
    if (j.contains("t_s") && !j.at("t_s").is_null()) {
        c.has_t_s_override = true;
        c.t_s_override = j.at("t_s").get<Real>();
    }
    get_if(j, "dilation_radius", c.dilation_radius);
    get_if(j, "sphere_radius", c.sphere_radius);
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        get_if(l, "color", c.loss.color);
        get_if(l, "eikonal", c.loss.eikonal);
        get_if(l, "mask", c.loss.mask);
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        get_if(s, "bootstrap_iters", c.schedule.bootstrap_iters);
        get_if(s, "total_iters", c.schedule.total_iters);
        get_if(s, "batch_size", c.schedule.batch_size);
        get_if(s, "cache_refresh_period", c.schedule.cache_refresh_period);
        get_if(s, "checkpoint_period", c.schedule.checkpoint_period);
        get_if(s, "lr", c.schedule.lr);
        get_if(s, "lr_final_scale", c.schedule.lr_final_scale);
        get_if(s, "sigma_lr_scale", c.schedule.sigma_lr_scale);
        get_if(s, "seed", c.schedule.seed);
    }
    if (j.contains("field")) {
        const auto& f = j.at("field");
        get_if(f, "pos_freqs", c.field.pos_freqs);
        get_if(f, "dir_freqs", c.field.dir_freqs);
        get_if(f, "include_identity", c.field.include_identity);
        get_if(f, "geometry_layers", c.field.geometry_layers);
        get_if(f, "geometry_width", c.field.geometry_width);
        get_if(f, "geometry_skip", c.field.geometry_skip);
        get_if(f, "color_layers", c.field.color_layers);
        get_if(f, "color_width", c.field.color_width);
        get_if(f, "feature_dim", c.field.feature_dim);
        get_if(f, "embed_dim", c.field.embed_dim);
        get_if(f, "sigma_inv_init", c.field.sigma_inv_init);
    }
    if (j.contains("sfm_filter")) {
        const auto& f = j.at("sfm_filter");
        get_if(f, "min_track_len", c.sfm_filter.min_track_len);
        get_if(f, "max_reproj", c.sfm_filter.max_reproj);
    }
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        get_if(p, "scene_dir", c.scene_dir);
        get_if(p, "out_dir", c.out_dir);
    }
    if (c.schedule.bootstrap_iters > c.schedule.total_iters)
        throw DataError("config: bootstrap_iters exceeds total_iters");
    if (c.n_v < 1 || c.n_s < 1) throw DataError("config: n_v and n_s must be >= 1");
    if (!(c.voxel_size > 0)) throw DataError("config: voxel_size must be > 0");
    if (c.octree_depth < 1) throw DataError("config: octree_depth must be >= 1");
    return c;
}

SceneConfig load_scene_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return scene_config_from_json(text);
}

void save_scene_config(const std::string& path, const SceneConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw DataError("config: cannot write " + path);
    out << scene_config_to_json(cfg) << "\n";
}

}  // namespace recon
