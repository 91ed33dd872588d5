#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "loopdet/dataio.hpp"
#include "loopdet/errors.hpp"

namespace loopdet {

/// One 1-D convolution layer: kernel 3, stride 1, zero padding 1 (same
/// shape). weights(co, ci*3 + t) is tap t of input channel ci for output
/// channel co.
struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    Eigen::MatrixXd weights;  // out_channels x (in_channels * 3)
    Eigen::VectorXd bias;     // out_channels

    static constexpr int kKernel = 3;
};

/// 1-D convolutional autoencoder over signals of length input_len
/// (divisible by 4). Encoder: conv -> pool -> conv -> pool -> conv;
/// decoder: conv -> upsample -> conv -> upsample -> conv. Hidden layers use
/// ReLU, the output layer a logistic sigmoid. The latent code is the
/// flattened final encoder feature map: (input_len/4) * widths[2] values.
struct CaeModel {
    int input_len = 0;
    std::array<int, 3> widths = {32, 64, 128};  // encoder channel widths
    std::vector<ConvLayer> layers;              // 6 conv layers in order

    int latent_len() const { return input_len / 4 * widths[2]; }
    std::size_t parameter_count() const;
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    // Adam moment/stability constants.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Batch of signals, one row per sample, plus per-layer activations kept for
/// the backward pass.
struct ForwardResult {
    Eigen::MatrixXd recon;   // B x input_len, values in (0,1)
    Eigen::MatrixXd latent;  // B x latent_len
};

/// Glorot-uniform initialization, biases zero; deterministic for a seed.
CaeModel init_cae(int input_len, std::uint64_t seed,
                  const std::array<int, 3>& widths = {32, 64, 128});

/// Runs the full encoder/decoder. Rows of batch are independent samples.
ForwardResult forward(const CaeModel& model, const Eigen::MatrixXd& batch);

/// Mean binary cross entropy over all elements; recon values must lie
/// strictly inside (0,1).
double bce_loss(const Eigen::MatrixXd& target, const Eigen::MatrixXd& recon);

/// Gradients of bce_loss(target, forward(model, batch).recon) with respect to
/// every layer's weights and biases, in layer order.
struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;
};
Gradients backward(const CaeModel& model, const Eigen::MatrixXd& batch,
                   const Eigen::MatrixXd& target);

/// Adam training over shuffled mini-batches. Descriptors must already be
/// normalized to [0,1]. Returns the mean per-element loss of every epoch.
std::vector<double> train_cae(CaeModel& model, const DescriptorSet& ds,
                              const TrainConfig& cfg);

/// Per-dimension min-max scaling to [0,1]; constant dimensions map to 0.5.
struct NormalizeScale {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};
std::pair<DescriptorSet, NormalizeScale> normalize_descriptors(const DescriptorSet& ds);

/// Latent codes of every descriptor (rows stacked in image order).
Eigen::MatrixXd encode(const CaeModel& model, const DescriptorSet& ds,
                       int batch_size = 64);

/// Self-supervised labels: k-means++ on the latent codes, then nearest
/// latent-centroid assignment. Descriptor-space centroids are rebuilt from
/// these labels with centroids_from_labels.
std::vector<int> ae_labels(const CaeModel& model, const DescriptorSet& ds, int k,
                           std::uint64_t seed);

CaeModel load_cae(const std::filesystem::path& path);
void save_cae(const CaeModel& model, const std::filesystem::path& path);

/// Loss history CSV with an "epoch,loss" header.
void save_loss_csv(const std::vector<double>& losses, const std::filesystem::path& path);

}  // namespace loopdet
