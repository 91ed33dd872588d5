#include "loopdet/dataio.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "binio.hpp"

namespace loopdet {

namespace {

void check_finite(const Eigen::MatrixXd& m, const std::string& context) {
    if (!m.allFinite()) {
        throw DataError("non-finite value in " + context);
    }
}

}  // namespace

DescriptorSet::DescriptorSet(int dim, std::vector<ImageDescriptors> images)
    : dim_(dim), images_(std::move(images)) {
    if (dim_ < 0) throw DimensionError("descriptor dimension must be non-negative");
    for (const auto& img : images_) {
        if (img.descriptors.size() > 0 && img.descriptors.cols() != dim_) {
            throw DimensionError("image '" + img.id + "' has dimension " +
                                 std::to_string(img.descriptors.cols()) + ", expected " +
                                 std::to_string(dim_));
        }
        check_finite(img.descriptors, "image '" + img.id + "'");
    }
}

std::size_t DescriptorSet::total_descriptors() const {
    std::size_t n = 0;
    for (const auto& img : images_) n += static_cast<std::size_t>(img.descriptors.rows());
    return n;
}

Eigen::MatrixXd DescriptorSet::stacked() const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(total_descriptors()), dim_);
    Eigen::Index row = 0;
    for (const auto& img : images_) {
        out.middleRows(row, img.descriptors.rows()) = img.descriptors;
        row += img.descriptors.rows();
    }
    return out;
}

bool DescriptorSet::operator==(const DescriptorSet& other) const {
    if (dim_ != other.dim_ || images_.size() != other.images_.size()) return false;
    for (std::size_t i = 0; i < images_.size(); ++i) {
        if (images_[i].id != other.images_[i].id) return false;
        if (images_[i].descriptors.rows() != other.images_[i].descriptors.rows()) return false;
        if (images_[i].descriptors != other.images_[i].descriptors) return false;
    }
    return true;
}

// DSC1: magic, u32 version=1, u32 image_count, u32 D; per image u16 id_len,
// id bytes, u32 n_i, then n_i*D float32 row-major.

DescriptorSet load_descriptors(const std::filesystem::path& path) {
    auto in = binio::open_in(path);
    binio::expect_magic(in, "DSC1", "descriptor set");
    const auto version = binio::read_u32(in, "version");
    if (version != 1) {
        throw FormatError("unsupported DSC1 version " + std::to_string(version));
    }
    const auto image_count = binio::read_u32(in, "image count");
    const auto dim = binio::read_u32(in, "dimension");

    std::vector<ImageDescriptors> images;
    images.reserve(image_count);
    for (std::uint32_t i = 0; i < image_count; ++i) {
        ImageDescriptors img;
        const auto id_len = binio::read_u16(in, "image id length");
        img.id.resize(id_len);
        if (id_len > 0 && !in.read(img.id.data(), id_len)) {
            throw FormatError("truncated file while reading image id");
        }
        const auto n = binio::read_u32(in, "descriptor count");
        img.descriptors.resize(n, dim);
        for (std::uint32_t r = 0; r < n; ++r) {
            for (std::uint32_t c = 0; c < dim; ++c) {
                const float v = binio::read_f32(in, "descriptor value");
                if (!std::isfinite(v)) {
                    throw DataError("non-finite descriptor value in image '" + img.id + "'");
                }
                img.descriptors(r, c) = static_cast<double>(v);
            }
        }
        images.push_back(std::move(img));
    }
    binio::expect_eof(in, "DSC1");
    return DescriptorSet(static_cast<int>(dim), std::move(images));
}

void save_descriptors(const DescriptorSet& ds, const std::filesystem::path& path) {
    auto out = binio::open_out(path);
    binio::write_magic(out, "DSC1");
    binio::write_u32(out, 1);
    binio::write_u32(out, static_cast<std::uint32_t>(ds.image_count()));
    binio::write_u32(out, static_cast<std::uint32_t>(ds.dim()));
    for (const auto& img : ds.images()) {
        if (img.id.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw DataError("image id longer than 65535 bytes: '" + img.id.substr(0, 32) + "...'");
        }
        binio::write_u16(out, static_cast<std::uint16_t>(img.id.size()));
        out.write(img.id.data(), static_cast<std::streamsize>(img.id.size()));
        binio::write_u32(out, static_cast<std::uint32_t>(img.descriptors.rows()));
        for (Eigen::Index r = 0; r < img.descriptors.rows(); ++r) {
            for (Eigen::Index c = 0; c < img.descriptors.cols(); ++c) {
                binio::write_f32(out, static_cast<float>(img.descriptors(r, c)));
            }
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

PcaModel fit_pca(const DescriptorSet& ds, int k) {
    const int dim = ds.dim();
    if (k < 1 || k > dim) {
        throw DimensionError("pca output dimension " + std::to_string(k) +
                             " out of range for input dimension " + std::to_string(dim));
    }
    const Eigen::MatrixXd x = ds.stacked();
    const Eigen::Index n = x.rows();
    if (n < 2) throw DataError("pca needs at least 2 descriptors");

    PcaModel model;
    model.mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw NumericError("eigendecomposition of the covariance failed");
    }

    // Eigen returns ascending eigenvalues; take the top k in descending order.
    model.basis.resize(dim, k);
    model.explained_variance.resize(k);
    for (int j = 0; j < k; ++j) {
        const int src = dim - 1 - j;
        Eigen::VectorXd col = solver.eigenvectors().col(src);
        // Sign convention: largest-magnitude component positive.
        Eigen::Index imax;
        col.cwiseAbs().maxCoeff(&imax);
        if (col(imax) < 0) col = -col;
        model.basis.col(j) = col;
        model.explained_variance(j) = std::max(solver.eigenvalues()(src), 0.0);
    }
    return model;
}

DescriptorSet apply_pca(const PcaModel& model, const DescriptorSet& ds) {
    if (ds.dim() != model.input_dim()) {
        throw DimensionError("descriptor dimension " + std::to_string(ds.dim()) +
                             " does not match pca input dimension " +
                             std::to_string(model.input_dim()));
    }
    std::vector<ImageDescriptors> projected;
    projected.reserve(ds.image_count());
    for (const auto& img : ds.images()) {
        ImageDescriptors out;
        out.id = img.id;
        out.descriptors =
            (img.descriptors.rowwise() - model.mean.transpose()) * model.basis;
        projected.push_back(std::move(out));
    }
    return DescriptorSet(model.output_dim(), std::move(projected));
}

GroundTruthMatrix load_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());

    std::vector<std::vector<int>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        std::vector<int> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t pos = 0;
            int value;
            try {
                value = std::stoi(cell, &pos);
            } catch (const std::exception&) {
                throw FormatError("unparseable ground truth cell '" + cell + "'");
            }
            while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
            if (pos != cell.size()) {
                throw FormatError("unparseable ground truth cell '" + cell + "'");
            }
            if (value != 0 && value != 1) {
                throw DataError("ground truth value " + std::to_string(value) +
                                " outside {0,1}");
            }
            row.push_back(value);
        }
        rows.push_back(std::move(row));
    }

    const std::size_t m = rows.size();
    for (const auto& row : rows) {
        if (row.size() != m) {
            throw FormatError("ground truth matrix is not square: " + std::to_string(m) +
                              " rows but a row with " + std::to_string(row.size()) +
                              " columns");
        }
    }

    GroundTruthMatrix gt;
    gt.entries.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            gt.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return gt;
}

// PCA1: magic, u32 D, u32 k, f64 mean, f64 basis row-major, f64 variances.

void save_pca(const PcaModel& model, const std::filesystem::path& path) {
    auto out = binio::open_out(path);
    binio::write_magic(out, "PCA1");
    binio::write_u32(out, static_cast<std::uint32_t>(model.input_dim()));
    binio::write_u32(out, static_cast<std::uint32_t>(model.output_dim()));
    for (Eigen::Index i = 0; i < model.mean.size(); ++i) binio::write_f64(out, model.mean(i));
    for (Eigen::Index r = 0; r < model.basis.rows(); ++r) {
        for (Eigen::Index c = 0; c < model.basis.cols(); ++c) {
            binio::write_f64(out, model.basis(r, c));
        }
    }
    for (Eigen::Index i = 0; i < model.explained_variance.size(); ++i) {
        binio::write_f64(out, model.explained_variance(i));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

PcaModel load_pca(const std::filesystem::path& path) {
    auto in = binio::open_in(path);
    binio::expect_magic(in, "PCA1", "pca model");
    const auto dim = binio::read_u32(in, "pca input dimension");
    const auto k = binio::read_u32(in, "pca output dimension");
    PcaModel model;
    model.mean.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) model.mean(i) = binio::read_f64(in, "pca mean");
    model.basis.resize(dim, k);
    for (std::uint32_t r = 0; r < dim; ++r) {
        for (std::uint32_t c = 0; c < k; ++c) {
            model.basis(r, c) = binio::read_f64(in, "pca basis");
        }
    }
    model.explained_variance.resize(k);
    for (std::uint32_t i = 0; i < k; ++i) {
        model.explained_variance(i) = binio::read_f64(in, "pca variance");
    }
    binio::expect_eof(in, "PCA1");
    return model;
}

}  // namespace loopdet
