#include "recon/field.hpp"

#include <cstring>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace recon {

namespace {

constexpr Real kPi = std::numbers::pi_v<Real>;

Real softplus(Real z, Real beta) {
    Real bz = beta * z;
    return bz > 0 ? z + std::log1p(std::exp(-bz)) / beta : std::log1p(std::exp(bz)) / beta;
}
Real logistic(Real bz) {
    return bz >= 0 ? 1.0 / (1.0 + std::exp(-bz)) : std::exp(bz) / (1.0 + std::exp(bz));
}

Mat act_value(Activation a, Real beta, const Mat& z) {
    switch (a) {
        case Activation::None: return z;
        case Activation::Softplus:
            return z.unaryExpr([beta](Real v) { return softplus(v, beta); });
        case Activation::Relu:
            return z.unaryExpr([](Real v) { return v > 0 ? v : 0.0; });
        case Activation::Tanh:
            return z.unaryExpr([](Real v) { return std::tanh(v); });
        case Activation::Sigmoid:
            return z.unaryExpr([](Real v) { return logistic(v); });
    }
    return z;
}

Mat act_prime(Activation a, Real beta, const Mat& z) {
    switch (a) {
        case Activation::None: return Mat::Ones(z.rows(), z.cols());
        case Activation::Softplus:
            return z.unaryExpr([beta](Real v) { return logistic(beta * v); });
        case Activation::Relu:
            return z.unaryExpr([](Real v) { return v > 0 ? 1.0 : 0.0; });
        case Activation::Tanh:
            return z.unaryExpr([](Real v) {
                Real t = std::tanh(v);
                return 1.0 - t * t;
            });
        case Activation::Sigmoid:
            return z.unaryExpr([](Real v) {
                Real s = logistic(v);
                return s * (1.0 - s);
            });
    }
    return z;
}

Mat act_second(Activation a, Real beta, const Mat& z) {
    switch (a) {
        case Activation::None:
        case Activation::Relu: return Mat::Zero(z.rows(), z.cols());
        case Activation::Softplus:
            return z.unaryExpr([beta](Real v) {
                Real s = logistic(beta * v);
                return beta * s * (1.0 - s);
            });
        case Activation::Tanh:
            return z.unaryExpr([](Real v) {
                Real t = std::tanh(v);
                return -2.0 * t * (1.0 - t * t);
            });
        case Activation::Sigmoid:
            return z.unaryExpr([](Real v) {
                Real s = logistic(v);
                return s * (1.0 - s) * (1.0 - 2.0 * s);
            });
    }
    return z;
}


// Single-pass value + derivative; for softplus one exp + one log per element.
void act_fused(Activation a, Real beta, const Mat& z, Mat& value, Mat& prime) {
    if (a == Activation::Softplus) {
        value.resizeLike(z);
        prime.resizeLike(z);
        const Real* zp = z.data();
        Real* vp = value.data();
        Real* pp = prime.data();
        const Eigen::Index n = z.size();
        for (Eigen::Index i = 0; i < n; ++i) {
            Real s = logistic(beta * zp[i]);
            pp[i] = s;
            vp[i] = s > 0 ? zp[i] - std::log(s) / beta : 0.0;
        }
        return;
    }
    value = act_value(a, beta, z);
    prime = act_prime(a, beta, z);
}

// Second derivative, reusing the stored first derivative where possible.
Mat act_second_from(Activation a, Real beta, const Mat& z, const Mat& prime) {
    if (a == Activation::Softplus)
        return (beta * prime.array() * (1.0 - prime.array())).matrix();
    return act_second(a, beta, z);
}

}  // namespace

void encode(const Mat& pts, const EncodingConfig& cfg, Mat& out) {
    const int in_dim = int(pts.rows());
    const Eigen::Index b = pts.cols();
    const int off = cfg.include_identity ? in_dim : 0;
    out.resize(cfg.dim(in_dim), b);
    if (cfg.include_identity) out.topRows(in_dim) = pts;
    for (int k = 0; k < cfg.freqs; ++k) {
        Real w = kPi * std::ldexp(1.0, k);
        out.middleRows(off + 2 * in_dim * k, in_dim) = (w * pts).array().sin();
        out.middleRows(off + 2 * in_dim * k + in_dim, in_dim) = (w * pts).array().cos();
    }
}

void encode_tangent(const Mat& pts, const EncodingConfig& cfg, Mat& out) {
    const int in_dim = int(pts.rows());
    const Eigen::Index b = pts.cols();
    const int off = cfg.include_identity ? in_dim : 0;
    out.setZero(cfg.dim(in_dim), in_dim * b);
    for (int a = 0; a < in_dim; ++a) {
        if (cfg.include_identity) out.row(a).segment(a * b, b).setOnes();
        for (int k = 0; k < cfg.freqs; ++k) {
            Real w = kPi * std::ldexp(1.0, k);
            auto xa = pts.row(a).array();
            out.row(off + 2 * in_dim * k + a).segment(a * b, b) = w * (w * xa).cos();
            out.row(off + 2 * in_dim * k + in_dim + a).segment(a * b, b) =
                -w * (w * xa).sin();
        }
    }
}

Vec encode_point(const Vec3& p, const EncodingConfig& cfg) {
    Mat pts(3, 1);
    pts << p.x, p.y, p.z;
    Mat out;
    encode(pts, cfg, out);
    return out.col(0);
}

void FieldGradients::setZero() {
    for (auto& m : geom_w) m.setZero();
    for (auto& m : geom_b) m.setZero();
    for (auto& m : color_w) m.setZero();
    for (auto& m : color_b) m.setZero();
    embed.setZero();
}

int NeuralField::geom_in_dim(int layer) const {
    if (layer == 0) return enc_x_.dim();
    int w = geom_spec_.width;
    return layer == geom_spec_.skip_at ? w + enc_x_.dim() : w;
}

int NeuralField::color_in_dim(int layer) const {
    if (layer == 0)
        return enc_x_.dim() + enc_v_.dim() + 3 + feature_dim_ + int(embed_.rows());
    return color_spec_.width;
}

NeuralField::NeuralField(const FieldSpecConfig& cfg, int num_images,
                         Real sphere_init_radius, uint64_t seed) {
    enc_x_ = {cfg.pos_freqs, cfg.include_identity};
    enc_v_ = {cfg.dir_freqs, cfg.include_identity};
    feature_dim_ = cfg.feature_dim;

    geom_spec_.layers = cfg.geometry_layers;
    geom_spec_.width = cfg.geometry_width;
    geom_spec_.hidden_act = Activation::Softplus;
    geom_spec_.softplus_beta = 100.0;
    geom_spec_.out_dim = 1 + feature_dim_;
    // interior layers only: a skip into the output layer would re-expose the
    // raw encoding to the geometric-init output row
    geom_spec_.skip_at =
        (cfg.geometry_skip > 0 && cfg.geometry_skip < cfg.geometry_layers - 1)
            ? cfg.geometry_skip
            : -1;

    color_spec_.layers = cfg.color_layers;
    color_spec_.width = cfg.color_width;
    color_spec_.hidden_act = Activation::Softplus;
    color_spec_.softplus_beta = 10.0;
    color_spec_.output_act = Activation::Sigmoid;
    color_spec_.out_dim = 3;
    color_spec_.skip_at = -1;

    Rng rng(seed);
    std::normal_distribution<Real> normal(0.0, 1.0);
    auto fill_normal = [&](Mat& m, Real mean, Real std) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = mean + std * normal(rng);
    };

    // Geometry: sphere initialization so d(x) ~ |x| - r at the start
    // (identity-only first layer, unit-mean output row, bias -r).
    const int gl = geom_spec_.layers;
    geom_w_.resize(gl);
    geom_b_.resize(gl);
    for (int l = 0; l < gl; ++l) {
        int in = geom_in_dim(l);
        int out = (l == gl - 1) ? geom_spec_.out_dim : geom_spec_.width;
        geom_w_[l].resize(out, in);
        geom_b_[l] = Mat::Zero(out, 1);
        if (l == gl - 1) {
            fill_normal(geom_w_[l], 0.0, std::sqrt(2.0 / in));
            // SDF output row
            Mat row(1, in);
            fill_normal(row, std::sqrt(kPi) / std::sqrt(Real(in)), 1e-4);
            geom_w_[l].row(0) = row;
            geom_b_[l](0, 0) = -sphere_init_radius;
        } else {
            fill_normal(geom_w_[l], 0.0, std::sqrt(2.0 / out));
            if (l == 0 && enc_x_.include_identity) {
                geom_w_[l].rightCols(in - 3).setZero();  // frequency part starts silent
            } else if (l == geom_spec_.skip_at) {
                int enc_dim = enc_x_.dim();
                geom_w_[l].rightCols(enc_dim - (enc_x_.include_identity ? 3 : 0)).setZero();
            }
        }
    }

    embed_ = Mat::Zero(cfg.embed_dim, num_images);

    const int cl = color_spec_.layers;
    color_w_.resize(cl);
    color_b_.resize(cl);
    for (int l = 0; l < cl; ++l) {
        int in = color_in_dim(l);
        int out = (l == cl - 1) ? color_spec_.out_dim : color_spec_.width;
        color_w_[l].resize(out, in);
        color_b_[l] = Mat::Zero(out, 1);
        fill_normal(color_w_[l], 0.0, std::sqrt(1.0 / in));
    }
}

NeuralField::GeomEval NeuralField::geom_forward(const Mat& pts, bool tangents,
                                                bool features) const {
    GeomEval fw;
    const Eigen::Index b = pts.cols();
    fw.batch = int(b);
    fw.tangents = tangents;
    fw.features = features;

    encode(pts, enc_x_, fw.enc);
    if (tangents) encode_tangent(pts, enc_x_, fw.enc_tan);

    const int L = geom_spec_.layers;
    fw.in.resize(L);
    fw.z.resize(L > 1 ? L - 1 : 0);
    fw.phip.resize(L > 1 ? L - 1 : 0);
    if (tangents) {
        fw.vin.resize(L);
        fw.u.resize(L > 1 ? L - 1 : 0);
    }

    Mat a = fw.enc;
    Mat va;
    if (tangents) va = fw.enc_tan;

    for (int l = 0; l < L; ++l) {
        if (l == geom_spec_.skip_at) {
            Mat cat(a.rows() + fw.enc.rows(), b);
            cat << a, fw.enc;
            fw.in[l] = std::move(cat);
            if (tangents) {
                Mat catv(va.rows() + fw.enc_tan.rows(), 3 * b);
                catv << va, fw.enc_tan;
                fw.vin[l] = std::move(catv);
            }
        } else {
            fw.in[l] = std::move(a);
            if (tangents) fw.vin[l] = std::move(va);
        }

        if (l == L - 1) {
            if (features) {
                Mat y = geom_w_[l] * fw.in[l] + geom_b_[l].replicate(1, b);
                fw.sdf = y.row(0).transpose();
                fw.feat = y.bottomRows(feature_dim_);
            } else {
                fw.sdf = (geom_w_[l].row(0) * fw.in[l]).transpose();
                fw.sdf.array() += geom_b_[l](0, 0);
            }
            if (tangents) {
                Mat g = geom_w_[l].row(0) * fw.vin[l];  // 1 x 3B
                fw.grad.resize(3, b);
                for (int ax = 0; ax < 3; ++ax) fw.grad.row(ax) = g.middleCols(ax * b, b);
            }
        } else {
            fw.z[l].noalias() = geom_w_[l] * fw.in[l];
            fw.z[l].colwise() += Vec(geom_b_[l].col(0));
            act_fused(geom_spec_.hidden_act, geom_spec_.softplus_beta, fw.z[l], a,
                      fw.phip[l]);
            if (tangents) {
                fw.u[l].noalias() = geom_w_[l] * fw.vin[l];
                va.resize(fw.u[l].rows(), 3 * b);
                for (int ax = 0; ax < 3; ++ax)
                    va.middleCols(ax * b, b) =
                        fw.phip[l].array() * fw.u[l].middleCols(ax * b, b).array();
            }
        }
    }
    return fw;
}

void NeuralField::geom_backward(const GeomEval& fw, const Vec& d_bar, const Mat& feat_bar,
                                const Mat& grad_bar, FieldGradients& grads) const {
    const Eigen::Index b = fw.batch;
    const int L = geom_spec_.layers;
    const bool tangents = fw.tangents && grad_bar.size() > 0;

    // last layer
    Mat a_bar;       // cotangent of the layer input (value chain)
    Mat va_bar;      // cotangent of the tangent input chains, width 3B
    {
        const Mat& in = fw.in[L - 1];
        if (fw.features && feat_bar.size() > 0) {
            Mat y_bar(1 + feature_dim_, b);
            y_bar.row(0) = d_bar.transpose();
            y_bar.bottomRows(feature_dim_) = feat_bar;
            grads.geom_w[L - 1].noalias() += y_bar * in.transpose();
            grads.geom_b[L - 1] += y_bar.rowwise().sum();
            a_bar.noalias() = geom_w_[L - 1].transpose() * y_bar;
        } else {
            Mat y_bar = d_bar.transpose();  // 1 x B
            grads.geom_w[L - 1].row(0).noalias() += y_bar * in.transpose();
            grads.geom_b[L - 1](0, 0) += y_bar.sum();
            a_bar.noalias() = geom_w_[L - 1].row(0).transpose() * y_bar;
        }
        if (tangents) {
            Mat g_bar(1, 3 * b);
            for (int ax = 0; ax < 3; ++ax) g_bar.middleCols(ax * b, b) = grad_bar.row(ax);
            grads.geom_w[L - 1].row(0).noalias() += g_bar * fw.vin[L - 1].transpose();
            va_bar.noalias() = geom_w_[L - 1].row(0).transpose() * g_bar;
        }
        if (L - 1 == geom_spec_.skip_at) {
            a_bar.conservativeResize(geom_spec_.width, b);
            if (tangents) va_bar.conservativeResize(geom_spec_.width, 3 * b);
        }
    }

    for (int l = L - 2; l >= 0; --l) {
        const Mat& phip = fw.phip[l];
        Mat z_bar = phip.array() * a_bar.array();
        Mat u_bar;
        if (tangents) {
            Mat phipp = act_second_from(geom_spec_.hidden_act, geom_spec_.softplus_beta,
                                        fw.z[l], phip);
            u_bar.resize(phip.rows(), 3 * b);
            for (int ax = 0; ax < 3; ++ax) {
                // value chain picks up the curvature of the activation
                z_bar.array() += phipp.array() * fw.u[l].middleCols(ax * b, b).array() *
                                 va_bar.middleCols(ax * b, b).array();
                u_bar.middleCols(ax * b, b) =
                    phip.array() * va_bar.middleCols(ax * b, b).array();
            }
        }
        grads.geom_w[l].noalias() += z_bar * fw.in[l].transpose();
        grads.geom_b[l] += z_bar.rowwise().sum();
        if (tangents) grads.geom_w[l].noalias() += u_bar * fw.vin[l].transpose();

        if (l == 0) break;  // encoding cotangent is not needed
        a_bar.noalias() = geom_w_[l].transpose() * z_bar;
        if (tangents) va_bar.noalias() = geom_w_[l].transpose() * u_bar;
        if (l == geom_spec_.skip_at) {
            a_bar.conservativeResize(geom_spec_.width, b);
            if (tangents) va_bar.conservativeResize(geom_spec_.width, 3 * b);
        }
    }
}

NeuralField::ColorEval NeuralField::color_forward(const Mat& pts, const Mat& dirs,
                                                  const Mat& normals, const Mat& feats,
                                                  const std::vector<int>& image_index) const {
    const Eigen::Index b = pts.cols();
    for (int i : image_index)
        if (i < 0 || i >= num_images())
            throw DataError("color: image index out of range");

    ColorEval fw;
    fw.batch = int(b);
    fw.image_index = image_index;

    Mat ex, ev;
    encode(pts, enc_x_, ex);
    encode(dirs, enc_v_, ev);
    fw.in0.resize(ex.rows() + ev.rows() + 3 + feature_dim_ + embed_.rows(), b);
    fw.in0.topRows(ex.rows()) = ex;
    fw.in0.middleRows(ex.rows(), ev.rows()) = ev;
    fw.in0.middleRows(ex.rows() + ev.rows(), 3) = normals;
    fw.in0.middleRows(ex.rows() + ev.rows() + 3, feature_dim_) = feats;
    for (Eigen::Index c = 0; c < b; ++c)
        fw.in0.col(c).tail(embed_.rows()) = embed_.col(image_index[size_t(c)]);

    const int L = color_spec_.layers;
    fw.in.resize(L);
    fw.phip.resize(L > 1 ? L - 1 : 0);
    Mat a = fw.in0;
    for (int l = 0; l < L; ++l) {
        fw.in[l] = std::move(a);
        Mat z;
        z.noalias() = color_w_[l] * fw.in[l];
        z.colwise() += Vec(color_b_[l].col(0));
        if (l == L - 1) {
            fw.out_z = std::move(z);
            fw.rgb = act_value(color_spec_.output_act, 1.0, fw.out_z);
        } else {
            act_fused(color_spec_.hidden_act, color_spec_.softplus_beta, z, a, fw.phip[l]);
        }
    }
    return fw;
}

void NeuralField::color_backward(const ColorEval& fw, const Mat& rgb_bar, Mat& normal_bar,
                                 Mat& feat_bar, FieldGradients& grads) const {
    const Eigen::Index b = fw.batch;
    const int L = color_spec_.layers;

    Mat z_bar;
    if (color_spec_.output_act == Activation::Sigmoid) {
        z_bar = rgb_bar.array() * (fw.rgb.array() * (1.0 - fw.rgb.array()));
    } else {
        z_bar = rgb_bar;
    }
    Mat a_bar;
    for (int l = L - 1; l >= 0; --l) {
        if (l < L - 1) z_bar = fw.phip[l].array() * a_bar.array();
        grads.color_w[l].noalias() += z_bar * fw.in[l].transpose();
        grads.color_b[l] += z_bar.rowwise().sum();
        a_bar.noalias() = color_w_[l].transpose() * z_bar;
    }

    const Eigen::Index ex = enc_x_.dim(), ev = enc_v_.dim();
    if (normal_bar.size() == 0) normal_bar = Mat::Zero(3, b);
    if (feat_bar.size() == 0) feat_bar = Mat::Zero(feature_dim_, b);
    normal_bar += a_bar.middleRows(ex + ev, 3);
    feat_bar += a_bar.middleRows(ex + ev + 3, feature_dim_);
    for (Eigen::Index c = 0; c < b; ++c)
        grads.embed.col(fw.image_index[size_t(c)]) += a_bar.col(c).tail(embed_.rows());
}

std::pair<Real, Vec3> NeuralField::sdf(const Vec3& x) const {
    Mat pts(3, 1);
    pts << x.x, x.y, x.z;
    auto fw = geom_forward(pts, true, false);
    return {fw.sdf(0), Vec3{fw.grad(0, 0), fw.grad(1, 0), fw.grad(2, 0)}};
}

std::array<Real, 3> NeuralField::color(const Vec3& x, const Vec3& v, int image_index) const {
    Mat pts(3, 1), dirs(3, 1);
    pts << x.x, x.y, x.z;
    dirs << v.x, v.y, v.z;
    auto g = geom_forward(pts, true, true);
    auto c = color_forward(pts, dirs, g.grad, g.feat, {image_index});
    return {c.rgb(0, 0), c.rgb(1, 0), c.rgb(2, 0)};
}

SdfBatchFn NeuralField::sdf_fn() const {
    return [this](std::span<const Vec3> pts, std::span<Real> out) {
        constexpr size_t chunk = 16384;
        for (size_t start = 0; start < pts.size(); start += chunk) {
            size_t n = std::min(chunk, pts.size() - start);
            Mat m(3, n);
            for (size_t i = 0; i < n; ++i) {
                m(0, i) = pts[start + i].x;
                m(1, i) = pts[start + i].y;
                m(2, i) = pts[start + i].z;
            }
            auto fw = geom_forward(m, false, false);
            for (size_t i = 0; i < n; ++i) out[start + i] = fw.sdf(Eigen::Index(i));
        }
    };
}

FieldGradients NeuralField::zero_gradients() const {
    FieldGradients g;
    for (const auto& w : geom_w_) g.geom_w.push_back(Mat::Zero(w.rows(), w.cols()));
    for (const auto& bb : geom_b_) g.geom_b.push_back(Mat::Zero(bb.rows(), bb.cols()));
    for (const auto& w : color_w_) g.color_w.push_back(Mat::Zero(w.rows(), w.cols()));
    for (const auto& bb : color_b_) g.color_b.push_back(Mat::Zero(bb.rows(), bb.cols()));
    g.embed = Mat::Zero(embed_.rows(), embed_.cols());
    return g;
}

std::vector<std::pair<std::string, Mat*>> NeuralField::named_tensors() {
    std::vector<std::pair<std::string, Mat*>> out;
    for (size_t l = 0; l < geom_w_.size(); ++l) {
        out.emplace_back("geom.w" + std::to_string(l), &geom_w_[l]);
        out.emplace_back("geom.b" + std::to_string(l), &geom_b_[l]);
    }
    for (size_t l = 0; l < color_w_.size(); ++l) {
        out.emplace_back("color.w" + std::to_string(l), &color_w_[l]);
        out.emplace_back("color.b" + std::to_string(l), &color_b_[l]);
    }
    out.emplace_back("embed", &embed_);
    return out;
}

std::vector<std::pair<std::string, const Mat*>> NeuralField::named_tensors() const {
    auto mut = const_cast<NeuralField*>(this)->named_tensors();
    std::vector<std::pair<std::string, const Mat*>> out;
    for (auto& [n, m] : mut) out.emplace_back(n, m);
    return out;
}

// --- checkpoint archive -----------------------------------------------------

namespace {
constexpr char kMagic[] = "RECON-CKPT-v1\n";
}

const Mat* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, m] : tensors)
        if (n == name) return &m;
    return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["iteration"] = ckpt.iteration;
    header["config"] = ckpt.config_json;
    auto& tensors = header["tensors"] = nlohmann::json::array();
    for (const auto& [name, m] : ckpt.tensors)
        tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    std::string hj = header.dump();

    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("checkpoint: cannot write " + tmp);
        out.write(kMagic, sizeof(kMagic) - 1);
        uint64_t len = hj.size();
        out.write(reinterpret_cast<const char*>(&len), 8);
        out.write(hj.data(), std::streamsize(hj.size()));
        for (const auto& [name, m] : ckpt.tensors)
            out.write(reinterpret_cast<const char*>(m.data()),
                      std::streamsize(sizeof(Real) * size_t(m.size())));
    }
    std::remove(path.c_str());
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("checkpoint: rename failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path);
    char magic[sizeof(kMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw DataError("checkpoint: bad magic in " + path);
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    std::string hj(len, '\0');
    in.read(hj.data(), std::streamsize(len));
    if (!in) throw DataError("checkpoint: truncated header in " + path);

    nlohmann::json header = nlohmann::json::parse(hj);
    Checkpoint ckpt;
    ckpt.iteration = header.at("iteration").get<int64_t>();
    ckpt.config_json = header.at("config").get<std::string>();
    for (const auto& t : header.at("tensors")) {
        Mat m(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
        in.read(reinterpret_cast<char*>(m.data()),
                std::streamsize(sizeof(Real) * size_t(m.size())));
        if (!in) throw DataError("checkpoint: truncated tensor payload in " + path);
        ckpt.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
    }
    return ckpt;
}

NeuralField field_from_checkpoint(const Checkpoint& ckpt) {
    SceneConfig cfg = scene_config_from_json(ckpt.config_json);
    const Mat* embed = ckpt.find("embed");
    if (!embed) throw DataError("checkpoint: missing embed tensor");
    NeuralField field(cfg.field, int(embed->cols()), 0.5, 0);
    for (auto& [name, dst] : field.named_tensors()) {
        const Mat* src = ckpt.find(name);
        if (!src) throw DataError("checkpoint: missing tensor " + name);
        if (src->rows() != dst->rows() || src->cols() != dst->cols())
            throw DataError("checkpoint: shape mismatch for " + name);
        *dst = *src;
    }
    return field;
}

}  // namespace recon
