#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "loopdet/chowliu.hpp"
#include "loopdet/codebook.hpp"
#include "loopdet/errors.hpp"

namespace loopdet {

/// Sentinel location index for the "new place" hypothesis.
inline constexpr int kNewPlace = -1;

struct FabmapParams {
    double lcd_threshold = 0.999;
    double p_new_prior = 0.9;
};

/// One scored hypothesis: an existing location (index >= 0) or kNewPlace.
struct MatchEntry {
    int location = kNewPlace;
    double loglik = 0.0;
    double probability = 0.0;
};

struct MatchResult {
    int query_index = 0;
    std::vector<MatchEntry> entries;  // locations in index order, then new place
};

/// Online map of locations with the per-word inverted index. Each location
/// stores its binary word row and the default (null observation) log
/// likelihood; the index lists, for each word, the locations containing it.
class LocationMap {
public:
    LocationMap(ChowLiuTree tree, DTable dtable);

    int vocab_size() const { return tree_.vocab_size(); }
    int size() const { return static_cast<int>(rows_.size()); }

    const ChowLiuTree& tree() const { return tree_; }
    const DTable& dtable() const { return dtable_; }
    const std::vector<std::uint8_t>& location_row(int i) const {
        return rows_[static_cast<std::size_t>(i)];
    }
    double default_loglik(int i) const { return defaults_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& locations_with_word(int q) const {
        return inverted_index_[static_cast<std::size_t>(q)];
    }

    /// Appends a location and returns its index.
    int add_location(std::span<const std::uint8_t> bow_row);

    /// Log observation likelihood of the query against every location,
    /// starting from the stored defaults and applying the sparse d-table
    /// adjustments through the inverted index.
    std::vector<double> query_likelihoods(std::span<const std::uint8_t> query) const;

private:
    ChowLiuTree tree_;
    DTable dtable_;
    std::vector<std::vector<int>> children_;
    std::vector<std::vector<std::uint8_t>> rows_;
    std::vector<double> defaults_;
    std::vector<std::vector<int>> inverted_index_;
};

/// Brute-force log observation likelihood of a query against one location
/// row, summing every word's contribution directly (no inverted index).
/// Reference path for the sparse computation.
double dense_likelihood(const ChowLiuTree& tree, const DTable& dtable,
                        std::span<const std::uint8_t> location_bow,
                        std::span<const std::uint8_t> query);

/// Mean-field stand-in for all unmapped locations: the likelihood of the
/// "average place" whose word q is present iff p_marg[q] >= 0.5.
double new_place_likelihood(const ChowLiuTree& tree, const DTable& dtable,
                            std::span<const std::uint8_t> query);

/// Normalized posterior over n existing locations plus the new place.
/// Prior mass p_new_prior goes to the new place and the remainder is uniform
/// over locations; the softmax is computed with max subtraction.
std::vector<MatchEntry> posterior(const std::vector<double>& logliks,
                                  double new_place_loglik, const FabmapParams& params);

struct SequenceDecision {
    std::string image_id;
    bool is_loop = false;
    int location = kNewPlace;   // location the image was associated with
    double probability = 0.0;   // best location posterior (loop) or new-place posterior
};

struct SequenceResult {
    Eigen::MatrixXd confusion;  // M x M, entry (i,j) = posterior of image j's location
    std::vector<SequenceDecision> decisions;
    std::vector<MatchResult> matches;
};

/// Processes the test images in order: score against the current map, close a
/// loop if the best location posterior exceeds the threshold, otherwise add a
/// new location. The confusion matrix is lower-triangular by construction.
SequenceResult run_sequence(const BowMatrix& bow_test, const ChowLiuTree& tree,
                            const DTable& dtable, const FabmapParams& params = {});

}  // namespace loopdet
