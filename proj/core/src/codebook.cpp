#include "loopdet/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binio.hpp"
#include "loopdet/rng.hpp"

namespace loopdet {

namespace {

// Index of the nearest centroid by squared L2 distance, smallest index on ties.
int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::VectorXd& x) {
    int best = 0;
    double best_d = (centroids.row(0).transpose() - x).squaredNorm();
    for (int j = 1; j < centroids.rows(); ++j) {
        const double d = (centroids.row(j).transpose() - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

// Greedy k-means++ seeding: first centroid uniform, then 2 + floor(log k)
// candidates drawn proportional to the squared distance to the nearest chosen
// centroid, keeping the candidate that lowers the total potential the most.
Eigen::MatrixXd kmeans_pp_seed(const Eigen::MatrixXd& points, int k, Rng& rng) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd centroids(k, points.cols());
    const int n_candidates = 2 + static_cast<int>(std::log(static_cast<double>(k)));

    const auto first = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    centroids.row(0) = points.row(first);

    Eigen::VectorXd min_sq = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int j = 1; j < k; ++j) {
        const double total = min_sq.sum();

        Eigen::Index best_index = -1;
        double best_potential = std::numeric_limits<double>::infinity();
        Eigen::VectorXd best_min_sq;
        for (int c = 0; c < n_candidates; ++c) {
            Eigen::Index chosen;
            if (total <= 0.0) {
                // All remaining points coincide with chosen centroids.
                chosen = static_cast<Eigen::Index>(
                    rng.uniform_int(static_cast<std::uint64_t>(n)));
            } else {
                const double target = rng.uniform() * total;
                double acc = 0.0;
                chosen = n - 1;
                for (Eigen::Index i = 0; i < n; ++i) {
                    acc += min_sq(i);
                    if (acc > target) {
                        chosen = i;
                        break;
                    }
                }
            }
            Eigen::VectorXd candidate_min_sq = min_sq.cwiseMin(
                (points.rowwise() - points.row(chosen)).rowwise().squaredNorm());
            const double potential = candidate_min_sq.sum();
            if (potential < best_potential) {
                best_potential = potential;
                best_index = chosen;
                best_min_sq = std::move(candidate_min_sq);
            }
        }
        centroids.row(j) = points.row(best_index);
        min_sq = std::move(best_min_sq);
    }
    return centroids;
}

}  // namespace

Eigen::MatrixXd kmeans_pp_centroids(const Eigen::MatrixXd& rows, int k, std::uint64_t seed) {
    if (k < 1 || rows.rows() < k) throw DataError("k-means++ needs at least k points");
    Rng rng(seed);
    return kmeans_pp_seed(rows, k, rng);
}

Codebook kmeans_train_matrix(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                             int max_iters, double tol, KmeansTrace* trace) {
    const Eigen::Index n = points.rows();
    if (k < 1) throw DataError("k must be positive");
    if (n < k) {
        throw DataError("k-means needs at least k=" + std::to_string(k) + " points, got " +
                        std::to_string(n));
    }
    if (max_iters < 1) throw DataError("max_iters must be positive");

    Rng rng(seed);
    Eigen::MatrixXd centroids = kmeans_pp_seed(points, k, rng);
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    if (trace) {
        trace->objective_history.clear();
        trace->iterations = 0;
    }

    double prev_objective = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iters; ++iter) {
        // Assignment step.
        double objective = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd x = points.row(i).transpose();
            const int j = nearest_centroid(centroids, x);
            labels[static_cast<std::size_t>(i)] = j;
            objective += (centroids.row(j).transpose() - x).squaredNorm();
        }
        if (objective > prev_objective * (1.0 + 1e-9) + 1e-12) {
            throw NumericError("k-means objective increased between iterations");
        }
        prev_objective = objective;
        if (trace) {
            trace->objective_history.push_back(objective);
            trace->iterations = iter + 1;
        }

        // Update step.
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
        std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
            ++sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
        }

        Eigen::MatrixXd next(k, points.cols());
        std::vector<int> empty;
        for (int j = 0; j < k; ++j) {
            if (sizes[static_cast<std::size_t>(j)] > 0) {
                next.row(j) = sums.row(j) / static_cast<double>(sizes[static_cast<std::size_t>(j)]);
            } else {
                empty.push_back(j);
            }
        }
        // Re-seed each empty cluster with the point farthest from its centroid.
        if (!empty.empty()) {
            std::vector<std::pair<double, Eigen::Index>> by_distance;
            by_distance.reserve(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d =
                    (centroids.row(labels[static_cast<std::size_t>(i)]) - points.row(i))
                        .squaredNorm();
                by_distance.emplace_back(d, i);
            }
            std::sort(by_distance.begin(), by_distance.end(),
                      [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return a.second < b.second;
                      });
            // empty.size() <= k <= n, so there are always enough points.
            for (std::size_t e = 0; e < empty.size(); ++e) {
                next.row(empty[e]) = points.row(by_distance[e].second);
            }
        }

        const double max_shift = (next - centroids).rowwise().norm().maxCoeff();
        centroids = next;
        if (max_shift < tol) break;
    }

    Codebook cb;
    cb.centroids = std::move(centroids);
    return cb;
}

Codebook kmeans_train(const DescriptorSet& ds, int k, std::uint64_t seed, int max_iters,
                      double tol, KmeansTrace* trace) {
    return kmeans_train_matrix(ds.stacked(), k, seed, max_iters, tol, trace);
}

std::vector<int> quantize_rows(const Codebook& cb, const Eigen::MatrixXd& rows) {
    if (rows.cols() != cb.dim() && rows.rows() > 0) {
        throw DimensionError("descriptor dimension " + std::to_string(rows.cols()) +
                             " does not match codebook dimension " + std::to_string(cb.dim()));
    }
    std::vector<int> labels(static_cast<std::size_t>(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        labels[static_cast<std::size_t>(i)] = nearest_centroid(cb.centroids, rows.row(i).transpose());
    }
    return labels;
}

std::vector<std::vector<int>> quantize(const Codebook& cb, const DescriptorSet& ds) {
    if (ds.dim() != cb.dim()) {
        throw DimensionError("descriptor dimension " + std::to_string(ds.dim()) +
                             " does not match codebook dimension " + std::to_string(cb.dim()));
    }
    std::vector<std::vector<int>> labels;
    labels.reserve(ds.image_count());
    for (const auto& img : ds.images()) {
        labels.push_back(quantize_rows(cb, img.descriptors));
    }
    return labels;
}

Codebook centroids_from_labels(const DescriptorSet& ds, const std::vector<int>& labels,
                               int k, int* n_empty) {
    if (k < 1) throw DataError("k must be positive");
    const Eigen::MatrixXd points = ds.stacked();
    if (labels.size() != static_cast<std::size_t>(points.rows())) {
        throw DataError("label count " + std::to_string(labels.size()) +
                        " does not match descriptor count " + std::to_string(points.rows()));
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, ds.dim());
    std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const int label = labels[static_cast<std::size_t>(i)];
        if (label < 0 || label >= k) {
            throw DataError("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(k) + ")");
        }
        sums.row(label) += points.row(i);
        ++sizes[static_cast<std::size_t>(label)];
    }

    const Eigen::RowVectorXd global_mean =
        points.rows() > 0 ? Eigen::RowVectorXd(points.colwise().mean())
                          : Eigen::RowVectorXd::Zero(ds.dim());

    Codebook cb;
    cb.centroids.resize(k, ds.dim());
    int empty = 0;
    for (int j = 0; j < k; ++j) {
        if (sizes[static_cast<std::size_t>(j)] > 0) {
            cb.centroids.row(j) = sums.row(j) / static_cast<double>(sizes[static_cast<std::size_t>(j)]);
        } else {
            cb.centroids.row(j) = global_mean;
            ++empty;
        }
    }
    if (n_empty) *n_empty = empty;
    return cb;
}

BowMatrix build_bow(const Codebook& cb, const DescriptorSet& ds) {
    const auto labels = quantize(cb, ds);

    BowMatrix bow;
    const auto m = static_cast<Eigen::Index>(ds.image_count());
    bow.counts = BowMatrix::CountMatrix::Zero(m, cb.size());
    bow.binary = BowMatrix::BinaryMatrix::Zero(m, cb.size());
    bow.image_ids.reserve(ds.image_count());
    for (Eigen::Index i = 0; i < m; ++i) {
        bow.image_ids.push_back(ds.image(static_cast<std::size_t>(i)).id);
        for (const int q : labels[static_cast<std::size_t>(i)]) {
            ++bow.counts(i, q);
            bow.binary(i, q) = 1;
        }
    }
    return bow;
}

// CBK1: magic, u32 |C|, u32 D, f64 row-major centroids.

void save_codebook(const Codebook& cb, const std::filesystem::path& path) {
    auto out = binio::open_out(path);
    binio::write_magic(out, "CBK1");
    binio::write_u32(out, static_cast<std::uint32_t>(cb.size()));
    binio::write_u32(out, static_cast<std::uint32_t>(cb.dim()));
    for (Eigen::Index r = 0; r < cb.centroids.rows(); ++r) {
        for (Eigen::Index c = 0; c < cb.centroids.cols(); ++c) {
            binio::write_f64(out, cb.centroids(r, c));
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path) {
    auto in = binio::open_in(path);
    binio::expect_magic(in, "CBK1", "codebook");
    const auto size = binio::read_u32(in, "codebook size");
    const auto dim = binio::read_u32(in, "codebook dimension");
    if (size < 1) throw DataError("codebook must have at least one centroid");
    Codebook cb;
    cb.centroids.resize(size, dim);
    for (std::uint32_t r = 0; r < size; ++r) {
        for (std::uint32_t c = 0; c < dim; ++c) {
            const double v = binio::read_f64(in, "centroid value");
            if (!std::isfinite(v)) throw DataError("non-finite centroid value");
            cb.centroids(r, c) = v;
        }
    }
    binio::expect_eof(in, "CBK1");
    return cb;
}

// BOW1: magic, u32 M, u32 |C|, M rows of u32 counts; binary derived on load.

void save_bow(const BowMatrix& bow, const std::filesystem::path& path) {
    auto out = binio::open_out(path);
    binio::write_magic(out, "BOW1");
    binio::write_u32(out, static_cast<std::uint32_t>(bow.image_count()));
    binio::write_u32(out, static_cast<std::uint32_t>(bow.vocab_size()));
    for (Eigen::Index r = 0; r < bow.counts.rows(); ++r) {
        for (Eigen::Index c = 0; c < bow.counts.cols(); ++c) {
            binio::write_u32(out, bow.counts(r, c));
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

BowMatrix load_bow(const std::filesystem::path& path) {
    auto in = binio::open_in(path);
    binio::expect_magic(in, "BOW1", "bow matrix");
    const auto m = binio::read_u32(in, "image count");
    const auto vocab = binio::read_u32(in, "vocabulary size");
    BowMatrix bow;
    bow.counts.resize(m, vocab);
    bow.binary.resize(m, vocab);
    for (std::uint32_t r = 0; r < m; ++r) {
        for (std::uint32_t c = 0; c < vocab; ++c) {
            const auto count = binio::read_u32(in, "bow count");
            bow.counts(r, c) = count;
            bow.binary(r, c) = count > 0 ? 1 : 0;
        }
    }
    bow.image_ids.resize(m);
    for (std::uint32_t r = 0; r < m; ++r) bow.image_ids[r] = std::to_string(r);
    binio::expect_eof(in, "BOW1");
    return bow;
}

}  // namespace loopdet
