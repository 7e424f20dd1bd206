#pragma once

#include <Eigen/Dense>

#include "recon/config.hpp"
#include "recon/core.hpp"

namespace recon {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct EncodingConfig {
    int freqs = 10;
    bool include_identity = true;

    int dim(int in_dim = 3) const {
        return (include_identity ? in_dim : 0) + 2 * freqs * in_dim;
    }
};

enum class Activation { None, Softplus, Relu, Tanh, Sigmoid };

struct MlpSpec {
    int layers = 4;  // number of weight matrices
    int width = 64;
    Activation hidden_act = Activation::Softplus;
    Real softplus_beta = 100.0;
    Activation output_act = Activation::None;
    int out_dim = 1;
    int skip_at = -1;  // layer whose input re-concatenates the encoding; <0 none
};

// Frequency encoding [p; sin(2^k pi p); cos(2^k pi p)], k = 0..freqs-1.
// Writes dim(in) rows per column of `pts` (rows 0..in-1 identity when enabled).
void encode(const Mat& pts, const EncodingConfig& cfg, Mat& out);
// Tangent d(encode)/d(p_axis) for all three axes, stacked as [B | B | B] columns.
void encode_tangent(const Mat& pts, const EncodingConfig& cfg, Mat& out);
Vec encode_point(const Vec3& p, const EncodingConfig& cfg);

struct FieldGradients {
    std::vector<Mat> geom_w, geom_b;
    std::vector<Mat> color_w, color_b;
    Mat embed;

    void setZero();
};

// SDF + color networks with per-image appearance embeddings. All passes are
// batched: points are 3xB column matrices. Gradients of the SDF w.r.t. the
// input position run as forward tangents; the parameter backward passes
// differentiate through both the value and the tangent computation, so losses
// on grad(d) (eikonal, color-from-normal) receive exact second-order terms.
class NeuralField {
public:
    NeuralField() = default;
    NeuralField(const FieldSpecConfig& cfg, int num_images, Real sphere_init_radius,
                uint64_t seed);

    struct GeomEval {
        int batch = 0;
        bool tangents = false, features = false;
        Vec sdf;       // B
        Mat feat;      // F x B (when features)
        Mat grad;      // 3 x B (when tangents)
        // saved state
        Mat enc, enc_tan;                 // E x B, E x 3B
        std::vector<Mat> in, z, phip;     // per layer; phip = act'(z), reused backward
        std::vector<Mat> vin, u;          // per layer (tangent chains), E/W x 3B
    };

    GeomEval geom_forward(const Mat& pts, bool tangents, bool features) const;
    // d_bar: B, feat_bar: FxB (or empty), grad_bar: 3xB (or empty)
    void geom_backward(const GeomEval& fw, const Vec& d_bar, const Mat& feat_bar,
                       const Mat& grad_bar, FieldGradients& grads) const;

    struct ColorEval {
        int batch = 0;
        Mat rgb;  // 3 x B in [0,1]
        std::vector<int> image_index;
        Mat in0;                   // stacked input
        std::vector<Mat> in, phip;
        Mat out_z;                 // pre-sigmoid output
    };

    // dirs must be unit length; normals are raw SDF gradients.
    ColorEval color_forward(const Mat& pts, const Mat& dirs, const Mat& normals,
                            const Mat& feats, const std::vector<int>& image_index) const;
    // Accumulates embedding/net gradients; adds input cotangents for the
    // normal and feature segments into normal_bar / feat_bar.
    void color_backward(const ColorEval& fw, const Mat& rgb_bar, Mat& normal_bar,
                        Mat& feat_bar, FieldGradients& grads) const;

    // single-point conveniences
    std::pair<Real, Vec3> sdf(const Vec3& x) const;
    std::array<Real, 3> color(const Vec3& x, const Vec3& v, int image_index) const;

    // batch SDF evaluator (values only) for meshing / cache refresh
    SdfBatchFn sdf_fn() const;

    FieldGradients zero_gradients() const;

    // registry for the optimizer, checkpoints and finite-difference tests
    std::vector<std::pair<std::string, Mat*>> named_tensors();
    std::vector<std::pair<std::string, const Mat*>> named_tensors() const;

    int num_images() const { return int(embed_.cols()); }
    int feature_dim() const { return feature_dim_; }
    const EncodingConfig& pos_encoding() const { return enc_x_; }
    const EncodingConfig& dir_encoding() const { return enc_v_; }
    const Mat& embeddings() const { return embed_; }
    Mat& embeddings() { return embed_; }
    Vec mean_embedding() const { return embed_.rowwise().mean(); }

private:
    EncodingConfig enc_x_, enc_v_;
    MlpSpec geom_spec_, color_spec_;
    int feature_dim_ = 0;
    std::vector<Mat> geom_w_, geom_b_;    // biases stored as column vectors
    std::vector<Mat> color_w_, color_b_;
    Mat embed_;                           // D x N

    int geom_in_dim(int layer) const;
    int color_in_dim(int layer) const;
};

// --- checkpoint archive -----------------------------------------------------

struct Checkpoint {
    int64_t iteration = 0;
    std::string config_json;
    std::vector<std::pair<std::string, Mat>> tensors;

    const Mat* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds a field from checkpoint tensors plus the archived config.
NeuralField field_from_checkpoint(const Checkpoint& ckpt);

}  // namespace recon
