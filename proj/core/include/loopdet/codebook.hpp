#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "loopdet/dataio.hpp"
#include "loopdet/errors.hpp"

namespace loopdet {

/// Vocabulary of |C| cluster centroids in descriptor space.
struct Codebook {
    Eigen::MatrixXd centroids;  // |C| x D

    int size() const { return static_cast<int>(centroids.rows()); }
    int dim() const { return static_cast<int>(centroids.cols()); }
};

/// Per-image word statistics: binary presence and count histograms.
/// Invariant: binary(i,q) == 1 iff counts(i,q) >= 1, and row i of counts
/// sums to the descriptor count of image i.
struct BowMatrix {
    using CountMatrix =
        Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using BinaryMatrix =
        Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    CountMatrix counts;   // M x |C|
    BinaryMatrix binary;  // M x |C|
    std::vector<std::string> image_ids;

    int image_count() const { return static_cast<int>(counts.rows()); }
    int vocab_size() const { return static_cast<int>(counts.cols()); }

    /// Binary presence row of image i as a contiguous view.
    std::span<const std::uint8_t> binary_row(int i) const {
        return {binary.data() + static_cast<std::size_t>(i) * binary.cols(),
                static_cast<std::size_t>(binary.cols())};
    }
};

struct KmeansTrace {
    std::vector<double> objective_history;  // within-cluster sum of squares per iteration
    int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed seed;
/// iterates until the max centroid L2 shift drops below tol or max_iters is
/// reached. Empty clusters are re-seeded to the point currently farthest from
/// its assigned centroid.
Codebook kmeans_train(const DescriptorSet& ds, int k, std::uint64_t seed,
                      int max_iters = 100, double tol = 1e-4,
                      KmeansTrace* trace = nullptr);

/// k-means on a plain row matrix (used for clustering latent codes).
Codebook kmeans_train_matrix(const Eigen::MatrixXd& rows, int k, std::uint64_t seed,
                             int max_iters = 100, double tol = 1e-4,
                             KmeansTrace* trace = nullptr);

/// The k-means++ seeding used by kmeans_train, exposed for reproducibility.
Eigen::MatrixXd kmeans_pp_centroids(const Eigen::MatrixXd& rows, int k, std::uint64_t seed);

/// Nearest-centroid assignment for every descriptor, grouped per image.
/// Ties break toward the smallest centroid index.
std::vector<std::vector<int>> quantize(const Codebook& cb, const DescriptorSet& ds);

/// Nearest-centroid label for every row of a matrix.
std::vector<int> quantize_rows(const Codebook& cb, const Eigen::MatrixXd& rows);

/// Rebuilds centroids as per-label means of the stacked descriptors. Labels
/// with no members fall back to the global mean (reported via n_empty).
Codebook centroids_from_labels(const DescriptorSet& ds, const std::vector<int>& labels,
                               int k, int* n_empty = nullptr);

/// Quantizes and histograms every image into counts + binary presence rows.
BowMatrix build_bow(const Codebook& cb, const DescriptorSet& ds);

Codebook load_codebook(const std::filesystem::path& path);
void save_codebook(const Codebook& cb, const std::filesystem::path& path);

BowMatrix load_bow(const std::filesystem::path& path);
void save_bow(const BowMatrix& bow, const std::filesystem::path& path);

}  // namespace loopdet
