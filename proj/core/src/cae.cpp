#include "loopdet/cae.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "binio.hpp"
#include "loopdet/codebook.hpp"
#include "loopdet/rng.hpp"

namespace loopdet {

namespace {

// Dense (batch, channels, length) activation block with contiguous rows per
// (sample, channel) pair.
struct Tensor3 {
    int batch = 0;
    int channels = 0;
    int len = 0;
    std::vector<double> data;

    void resize(int b, int c, int l) {
        batch = b;
        channels = c;
        len = l;
        data.assign(static_cast<std::size_t>(b) * c * l, 0.0);
    }
    double* row(int b, int c) {
        return data.data() + (static_cast<std::size_t>(b) * channels + c) * len;
    }
    const double* row(int b, int c) const {
        return data.data() + (static_cast<std::size_t>(b) * channels + c) * len;
    }
};

// y[l] += w * x[l + t - 1] over the valid range for tap t in {0,1,2}.
void add_shifted(double* y, const double* x, double w, int len, int t) {
    switch (t) {
        case 0:
            for (int l = 1; l < len; ++l) y[l] += w * x[l - 1];
            break;
        case 1:
            for (int l = 0; l < len; ++l) y[l] += w * x[l];
            break;
        default:
            for (int l = 0; l + 1 < len; ++l) y[l] += w * x[l + 1];
            break;
    }
}

// Accumulates sum_l dy[l] * x[l + t - 1] over the valid range.
double dot_shifted(const double* dy, const double* x, int len, int t) {
    double acc = 0.0;
    switch (t) {
        case 0:
            for (int l = 1; l < len; ++l) acc += dy[l] * x[l - 1];
            break;
        case 1:
            for (int l = 0; l < len; ++l) acc += dy[l] * x[l];
            break;
        default:
            for (int l = 0; l + 1 < len; ++l) acc += dy[l] * x[l + 1];
            break;
    }
    return acc;
}

void conv_forward(const ConvLayer& layer, const Tensor3& x, Tensor3& out) {
    out.resize(x.batch, layer.out_channels, x.len);
    for (int b = 0; b < x.batch; ++b) {
        for (int co = 0; co < layer.out_channels; ++co) {
            double* y = out.row(b, co);
            const double bias = layer.bias(co);
            for (int l = 0; l < x.len; ++l) y[l] = bias;
            for (int ci = 0; ci < layer.in_channels; ++ci) {
                const double* xin = x.row(b, ci);
                for (int t = 0; t < ConvLayer::kKernel; ++t) {
                    add_shifted(y, xin, layer.weights(co, ci * 3 + t), x.len, t);
                }
            }
        }
    }
}

// dx gets the full gradient; pass nullptr for the input layer.
void conv_backward(const ConvLayer& layer, const Tensor3& x, const Tensor3& dout,
                   Tensor3* dx, Eigen::MatrixXd& dw, Eigen::VectorXd& db) {
    dw = Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols());
    db = Eigen::VectorXd::Zero(layer.bias.size());
    if (dx) dx->resize(x.batch, x.channels, x.len);

    for (int b = 0; b < x.batch; ++b) {
        for (int co = 0; co < layer.out_channels; ++co) {
            const double* dy = dout.row(b, co);
            for (int l = 0; l < x.len; ++l) db(co) += dy[l];
            for (int ci = 0; ci < layer.in_channels; ++ci) {
                const double* xin = x.row(b, ci);
                for (int t = 0; t < ConvLayer::kKernel; ++t) {
                    dw(co, ci * 3 + t) += dot_shifted(dy, xin, x.len, t);
                }
                if (dx) {
                    // dX[l + t - 1] += w * dY[l]  <=>  dX[l'] += w * dY[l' + 1 - t]
                    double* dxr = dx->row(b, ci);
                    for (int t = 0; t < ConvLayer::kKernel; ++t) {
                        add_shifted(dxr, dy, layer.weights(co, ci * 3 + t), x.len, 2 - t);
                    }
                }
            }
        }
    }
}

void relu_forward(const Tensor3& a, Tensor3& r) {
    r.resize(a.batch, a.channels, a.len);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        r.data[i] = a.data[i] > 0.0 ? a.data[i] : 0.0;
    }
}

void relu_backward(const Tensor3& a, const Tensor3& dr, Tensor3& da) {
    da.resize(a.batch, a.channels, a.len);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        da.data[i] = a.data[i] > 0.0 ? dr.data[i] : 0.0;
    }
}

// Max pool size 2 stride 2; argmax keeps the first element on ties.
void pool_forward(const Tensor3& x, Tensor3& out, std::vector<int>& argmax) {
    out.resize(x.batch, x.channels, x.len / 2);
    argmax.assign(out.data.size(), 0);
    std::size_t k = 0;
    for (int b = 0; b < x.batch; ++b) {
        for (int c = 0; c < x.channels; ++c) {
            const double* xin = x.row(b, c);
            double* y = out.row(b, c);
            for (int l = 0; l < out.len; ++l, ++k) {
                if (xin[2 * l] >= xin[2 * l + 1]) {
                    y[l] = xin[2 * l];
                    argmax[k] = 2 * l;
                } else {
                    y[l] = xin[2 * l + 1];
                    argmax[k] = 2 * l + 1;
                }
            }
        }
    }
}

void pool_backward(const std::vector<int>& argmax, const Tensor3& dout, Tensor3& dx) {
    dx.resize(dout.batch, dout.channels, dout.len * 2);
    std::size_t k = 0;
    for (int b = 0; b < dout.batch; ++b) {
        for (int c = 0; c < dout.channels; ++c) {
            const double* dy = dout.row(b, c);
            double* dxr = dx.row(b, c);
            for (int l = 0; l < dout.len; ++l, ++k) {
                dxr[argmax[k]] += dy[l];
            }
        }
    }
}

// Nearest-neighbor repeat x2.
void upsample_forward(const Tensor3& x, Tensor3& out) {
    out.resize(x.batch, x.channels, x.len * 2);
    for (int b = 0; b < x.batch; ++b) {
        for (int c = 0; c < x.channels; ++c) {
            const double* xin = x.row(b, c);
            double* y = out.row(b, c);
            for (int l = 0; l < x.len; ++l) {
                y[2 * l] = xin[l];
                y[2 * l + 1] = xin[l];
            }
        }
    }
}

void upsample_backward(const Tensor3& dout, Tensor3& dx) {
    dx.resize(dout.batch, dout.channels, dout.len / 2);
    for (int b = 0; b < dout.batch; ++b) {
        for (int c = 0; c < dout.channels; ++c) {
            const double* dy = dout.row(b, c);
            double* dxr = dx.row(b, c);
            for (int l = 0; l < dx.len; ++l) {
                dxr[l] = dy[2 * l] + dy[2 * l + 1];
            }
        }
    }
}

struct Cache {
    Tensor3 x0, a1, r1, p1, a2, r2, p2, a3, r3, a4, r4, u4, a5, r5, u5, a6, y;
    std::vector<int> arg1, arg2;
};

void check_model(const CaeModel& model) {
    if (model.layers.size() != 6) throw ConfigError("cae model must have 6 conv layers");
}

void forward_cached(const CaeModel& model, const Eigen::MatrixXd& batch, Cache& cache) {
    check_model(model);
    if (batch.cols() != model.input_len) {
        throw DimensionError("batch signal length " + std::to_string(batch.cols()) +
                             " does not match model input length " +
                             std::to_string(model.input_len));
    }
    const int b = static_cast<int>(batch.rows());
    const int len = model.input_len;

    cache.x0.resize(b, 1, len);
    for (int i = 0; i < b; ++i) {
        double* row = cache.x0.row(i, 0);
        for (int l = 0; l < len; ++l) row[l] = batch(i, l);
    }

    conv_forward(model.layers[0], cache.x0, cache.a1);
    relu_forward(cache.a1, cache.r1);
    pool_forward(cache.r1, cache.p1, cache.arg1);

    conv_forward(model.layers[1], cache.p1, cache.a2);
    relu_forward(cache.a2, cache.r2);
    pool_forward(cache.r2, cache.p2, cache.arg2);

    conv_forward(model.layers[2], cache.p2, cache.a3);
    relu_forward(cache.a3, cache.r3);

    conv_forward(model.layers[3], cache.r3, cache.a4);
    relu_forward(cache.a4, cache.r4);
    upsample_forward(cache.r4, cache.u4);

    conv_forward(model.layers[4], cache.u4, cache.a5);
    relu_forward(cache.a5, cache.r5);
    upsample_forward(cache.r5, cache.u5);

    conv_forward(model.layers[5], cache.u5, cache.a6);

    cache.y.resize(b, 1, len);
    for (std::size_t i = 0; i < cache.a6.data.size(); ++i) {
        cache.y.data[i] = 1.0 / (1.0 + std::exp(-cache.a6.data[i]));
    }
}

}  // namespace

std::size_t CaeModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) {
        n += static_cast<std::size_t>(layer.weights.size()) +
             static_cast<std::size_t>(layer.bias.size());
    }
    return n;
}

CaeModel init_cae(int input_len, std::uint64_t seed, const std::array<int, 3>& widths) {
    if (input_len <= 0 || input_len % 4 != 0) {
        throw ConfigError("input length " + std::to_string(input_len) +
                          " must be a positive multiple of 4");
    }
    for (const int w : widths) {
        if (w < 1) throw ConfigError("channel widths must be positive");
    }

    CaeModel model;
    model.input_len = input_len;
    model.widths = widths;

    const int w0 = widths[0], w1 = widths[1], w2 = widths[2];
    const std::array<std::pair<int, int>, 6> shapes = {{
        {1, w0}, {w0, w1}, {w1, w2},  // encoder
        {w2, w2}, {w2, w1}, {w1, 1},  // decoder
    }};

    Rng rng(seed);
    for (const auto& [in_ch, out_ch] : shapes) {
        ConvLayer layer;
        layer.in_channels = in_ch;
        layer.out_channels = out_ch;
        layer.weights.resize(out_ch, in_ch * ConvLayer::kKernel);
        layer.bias = Eigen::VectorXd::Zero(out_ch);
        const double limit =
            std::sqrt(6.0 / (3.0 * in_ch + 3.0 * out_ch));  // Glorot uniform
        for (int co = 0; co < out_ch; ++co) {
            for (int j = 0; j < layer.weights.cols(); ++j) {
                layer.weights(co, j) = rng.uniform(-limit, limit);
            }
        }
        model.layers.push_back(std::move(layer));
    }
    return model;
}

ForwardResult forward(const CaeModel& model, const Eigen::MatrixXd& batch) {
    Cache cache;
    forward_cached(model, batch, cache);

    const int b = static_cast<int>(batch.rows());
    ForwardResult result;
    result.recon.resize(b, model.input_len);
    for (int i = 0; i < b; ++i) {
        const double* row = cache.y.row(i, 0);
        for (int l = 0; l < model.input_len; ++l) result.recon(i, l) = row[l];
    }

    const int latent_channels = cache.r3.channels;
    const int latent_spatial = cache.r3.len;
    result.latent.resize(b, latent_channels * latent_spatial);
    for (int i = 0; i < b; ++i) {
        for (int c = 0; c < latent_channels; ++c) {
            const double* row = cache.r3.row(i, c);
            for (int l = 0; l < latent_spatial; ++l) {
                result.latent(i, c * latent_spatial + l) = row[l];
            }
        }
    }
    return result;
}

double bce_loss(const Eigen::MatrixXd& target, const Eigen::MatrixXd& recon) {
    if (target.rows() != recon.rows() || target.cols() != recon.cols()) {
        throw DimensionError("target and reconstruction shapes differ");
    }
    const auto n = static_cast<double>(target.size());
    if (n == 0) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < target.rows(); ++i) {
        for (Eigen::Index j = 0; j < target.cols(); ++j) {
            const double y = target(i, j);
            const double p = recon(i, j);
            if (!(p > 0.0 && p < 1.0)) {
                throw NumericError("reconstruction value " + std::to_string(p) +
                                   " outside (0,1)");
            }
            sum += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        }
    }
    return -sum / n;
}

Gradients backward(const CaeModel& model, const Eigen::MatrixXd& batch,
                   const Eigen::MatrixXd& target) {
    if (target.rows() != batch.rows() || target.cols() != batch.cols()) {
        throw DimensionError("target and batch shapes differ");
    }
    Cache cache;
    forward_cached(model, batch, cache);

    Gradients grads;
    grads.weights.resize(6);
    grads.bias.resize(6);

    const int b = static_cast<int>(batch.rows());
    const int len = model.input_len;
    const double n = static_cast<double>(batch.size());

    // Sigmoid + cross entropy collapse to (y - target) / n at the last
    // pre-activation.
    Tensor3 da6;
    da6.resize(b, 1, len);
    for (int i = 0; i < b; ++i) {
        const double* y = cache.y.row(i, 0);
        double* d = da6.row(i, 0);
        for (int l = 0; l < len; ++l) d[l] = (y[l] - target(i, l)) / n;
    }

    Tensor3 du5, dr5, da5, du4, dr4, da4, dr3, da3, dp2, dr2, da2, dp1, dr1, da1;

    conv_backward(model.layers[5], cache.u5, da6, &du5, grads.weights[5], grads.bias[5]);
    upsample_backward(du5, dr5);
    relu_backward(cache.a5, dr5, da5);

    conv_backward(model.layers[4], cache.u4, da5, &du4, grads.weights[4], grads.bias[4]);
    upsample_backward(du4, dr4);
    relu_backward(cache.a4, dr4, da4);

    conv_backward(model.layers[3], cache.r3, da4, &dr3, grads.weights[3], grads.bias[3]);
    relu_backward(cache.a3, dr3, da3);

    conv_backward(model.layers[2], cache.p2, da3, &dp2, grads.weights[2], grads.bias[2]);
    pool_backward(cache.arg2, dp2, dr2);
    relu_backward(cache.a2, dr2, da2);

    conv_backward(model.layers[1], cache.p1, da2, &dp1, grads.weights[1], grads.bias[1]);
    pool_backward(cache.arg1, dp1, dr1);
    relu_backward(cache.a1, dr1, da1);

    conv_backward(model.layers[0], cache.x0, da1, nullptr, grads.weights[0], grads.bias[0]);
    return grads;
}

std::vector<double> train_cae(CaeModel& model, const DescriptorSet& ds,
                              const TrainConfig& cfg) {
    check_model(model);
    if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
    if (cfg.batch_size < 1) throw ConfigError("batch size must be positive");
    if (!(cfg.learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");

    const Eigen::MatrixXd data = ds.stacked();
    if (data.cols() != model.input_len) {
        throw DimensionError("descriptor dimension " + std::to_string(data.cols()) +
                             " does not match model input length " +
                             std::to_string(model.input_len));
    }
    if ((data.array() < 0.0).any() || (data.array() > 1.0).any()) {
        throw DataError("descriptors must be normalized to [0,1] before training");
    }
    const auto n = static_cast<int>(data.rows());
    if (n == 0) throw DataError("no descriptors to train on");

    // Adam state.
    std::vector<Eigen::MatrixXd> mw(6), vw(6);
    std::vector<Eigen::VectorXd> mb(6), vb(6);
    for (int i = 0; i < 6; ++i) {
        mw[i] = Eigen::MatrixXd::Zero(model.layers[i].weights.rows(),
                                      model.layers[i].weights.cols());
        vw[i] = mw[i];
        mb[i] = Eigen::VectorXd::Zero(model.layers[i].bias.size());
        vb[i] = mb[i];
    }
    long step = 0;

    Rng rng(cfg.seed);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> loss_history;
    loss_history.reserve(static_cast<std::size_t>(cfg.epochs));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;  // per-element loss weighted by element count

        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bsize = std::min(cfg.batch_size, n - start);
            Eigen::MatrixXd batch(bsize, model.input_len);
            for (int i = 0; i < bsize; ++i) {
                batch.row(i) = data.row(order[static_cast<std::size_t>(start + i)]);
            }

            Cache cache;
            forward_cached(model, batch, cache);
            double batch_sum = 0.0;
            for (int i = 0; i < bsize; ++i) {
                const double* y = cache.y.row(i, 0);
                for (int l = 0; l < model.input_len; ++l) {
                    const double t = batch(i, l);
                    batch_sum -= t * std::log(y[l]) + (1.0 - t) * std::log(1.0 - y[l]);
                }
            }
            loss_sum += batch_sum;

            const auto grads = backward(model, batch, batch);

            ++step;
            const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (int i = 0; i < 6; ++i) {
                auto& layer = model.layers[i];
                mw[i] = cfg.beta1 * mw[i] + (1.0 - cfg.beta1) * grads.weights[i];
                vw[i] = cfg.beta2 * vw[i] +
                        (1.0 - cfg.beta2) * grads.weights[i].cwiseProduct(grads.weights[i]);
                layer.weights.array() -=
                    cfg.learning_rate * (mw[i].array() / bias1) /
                    ((vw[i].array() / bias2).sqrt() + cfg.epsilon);

                mb[i] = cfg.beta1 * mb[i] + (1.0 - cfg.beta1) * grads.bias[i];
                vb[i] = cfg.beta2 * vb[i] +
                        (1.0 - cfg.beta2) * grads.bias[i].cwiseProduct(grads.bias[i]);
                layer.bias.array() -= cfg.learning_rate * (mb[i].array() / bias1) /
                                      ((vb[i].array() / bias2).sqrt() + cfg.epsilon);
            }
        }
        loss_history.push_back(loss_sum /
                               (static_cast<double>(n) * model.input_len));
    }
    return loss_history;
}

std::pair<DescriptorSet, NormalizeScale> normalize_descriptors(const DescriptorSet& ds) {
    NormalizeScale scale;
    scale.lo = Eigen::VectorXd::Zero(ds.dim());
    scale.hi = Eigen::VectorXd::Zero(ds.dim());

    if (ds.total_descriptors() == 0) {
        return {ds, scale};
    }

    const Eigen::MatrixXd all = ds.stacked();
    scale.lo = all.colwise().minCoeff();
    scale.hi = all.colwise().maxCoeff();

    std::vector<ImageDescriptors> images;
    images.reserve(ds.image_count());
    for (const auto& img : ds.images()) {
        ImageDescriptors out;
        out.id = img.id;
        out.descriptors.resize(img.descriptors.rows(), img.descriptors.cols());
        for (Eigen::Index r = 0; r < img.descriptors.rows(); ++r) {
            for (Eigen::Index c = 0; c < img.descriptors.cols(); ++c) {
                const double span = scale.hi(c) - scale.lo(c);
                out.descriptors(r, c) =
                    span > 0.0 ? (img.descriptors(r, c) - scale.lo(c)) / span : 0.5;
            }
        }
        images.push_back(std::move(out));
    }
    return {DescriptorSet(ds.dim(), std::move(images)), scale};
}

Eigen::MatrixXd encode(const CaeModel& model, const DescriptorSet& ds, int batch_size) {
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    const Eigen::MatrixXd data = ds.stacked();
    Eigen::MatrixXd latents(data.rows(), model.latent_len());
    for (Eigen::Index start = 0; start < data.rows(); start += batch_size) {
        const Eigen::Index bsize = std::min<Eigen::Index>(batch_size, data.rows() - start);
        const auto result = forward(model, data.middleRows(start, bsize));
        latents.middleRows(start, bsize) = result.latent;
    }
    return latents;
}

std::vector<int> ae_labels(const CaeModel& model, const DescriptorSet& ds, int k,
                           std::uint64_t seed) {
    const Eigen::MatrixXd latents = encode(model, ds);
    const Codebook latent_centroids = kmeans_train_matrix(latents, k, seed);
    return quantize_rows(latent_centroids, latents);
}

// CAE1: magic, u32 input_len, u32 layer count, per layer u32 in/out channels
// then f64 weights (row-major) and f64 biases.

void save_cae(const CaeModel& model, const std::filesystem::path& path) {
    auto out = binio::open_out(path);
    binio::write_magic(out, "CAE1");
    binio::write_u32(out, static_cast<std::uint32_t>(model.input_len));
    binio::write_u32(out, static_cast<std::uint32_t>(model.layers.size()));
    for (const auto& layer : model.layers) {
        binio::write_u32(out, static_cast<std::uint32_t>(layer.in_channels));
        binio::write_u32(out, static_cast<std::uint32_t>(layer.out_channels));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                binio::write_f64(out, layer.weights(r, c));
            }
        }
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
            binio::write_f64(out, layer.bias(i));
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

CaeModel load_cae(const std::filesystem::path& path) {
    auto in = binio::open_in(path);
    binio::expect_magic(in, "CAE1", "cae model");
    CaeModel model;
    model.input_len = static_cast<int>(binio::read_u32(in, "input length"));
    const auto n_layers = binio::read_u32(in, "layer count");
    if (n_layers != 6) throw FormatError("cae model must have 6 layers");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        ConvLayer layer;
        layer.in_channels = static_cast<int>(binio::read_u32(in, "in channels"));
        layer.out_channels = static_cast<int>(binio::read_u32(in, "out channels"));
        layer.weights.resize(layer.out_channels, layer.in_channels * ConvLayer::kKernel);
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = binio::read_f64(in, "weight");
            }
        }
        layer.bias.resize(layer.out_channels);
        for (Eigen::Index j = 0; j < layer.bias.size(); ++j) {
            layer.bias(j) = binio::read_f64(in, "bias");
        }
        model.layers.push_back(std::move(layer));
    }
    binio::expect_eof(in, "CAE1");
    model.widths = {model.layers[0].out_channels, model.layers[1].out_channels,
                    model.layers[2].out_channels};
    return model;
}

void save_loss_csv(const std::vector<double>& losses, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "epoch,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < losses.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g", losses[i]);
        out << i << ',' << buf << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace loopdet
