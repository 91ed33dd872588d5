#pragma once

#include <filesystem>
#include <vector>

#include "loopdet/codebook.hpp"
#include "loopdet/errors.hpp"

namespace loopdet {

/// Dependency tree over the binary word variables. parent[q] is the parent
/// word of q (-1 for the root). p_marg[q] = P(z_q = 1); p_given_parent1 and
/// p_given_parent0 condition on the parent word being present / absent. For
/// the root both conditionals equal the marginal.
struct ChowLiuTree {
    std::vector<int> parent;
    int root = 0;
    std::vector<double> p_marg;
    std::vector<double> p_given_parent1;
    std::vector<double> p_given_parent0;

    int vocab_size() const { return static_cast<int>(parent.size()); }

    /// Child lists derived from the parent array.
    std::vector<std::vector<int>> children() const;
};

/// Observation-noise constants used by the likelihood increments.
struct DetectorModel {
    double p_obs = 0.39;
    double q_obs = 0.61;
};

/// Per-word log-likelihood increments. d1 is the default (null observation)
/// contribution of a word present in a location; d2-d4 are corrections
/// applied per query word, already expressed relative to d1.
struct DTable {
    std::vector<double> d1;
    std::vector<double> d2;
    std::vector<double> d3;
    std::vector<double> d4;

    int vocab_size() const { return static_cast<int>(d1.size()); }
};

/// Empirical mutual information between word columns q and r of the BoW
/// matrix, Laplace-smoothed with one pseudo-count per joint cell.
double mutual_information(const BowMatrix& bow, int q, int r);

/// Maximum-mutual-information spanning tree over the word columns (Prim's
/// algorithm from word 0, index tie-breaking), with the marginal and
/// parent-conditional probabilities estimated under the same smoothing and
/// clamped to [1e-6, 1 - 1e-6].
ChowLiuTree learn_cltree(const BowMatrix& bow);

/// Precomputed log-likelihood increments for every word. Throws NumericError
/// naming the word and sub-expression if any argument of a log is not a
/// positive finite number.
DTable precompute_d(const ChowLiuTree& tree, const DetectorModel& det = {});

ChowLiuTree load_cltree(const std::filesystem::path& path);
void save_cltree(const ChowLiuTree& tree, const std::filesystem::path& path);

DTable load_dtable(const std::filesystem::path& path);
void save_dtable(const DTable& dt, const std::filesystem::path& path);

}  // namespace loopdet
