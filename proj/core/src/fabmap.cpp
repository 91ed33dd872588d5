#include "loopdet/fabmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace loopdet {

namespace {

void check_row_length(std::size_t got, int vocab, const char* what) {
    if (got != static_cast<std::size_t>(vocab)) {
        throw DimensionError(std::string(what) + " length " + std::to_string(got) +
                             " does not match vocabulary size " + std::to_string(vocab));
    }
}

}  // namespace

LocationMap::LocationMap(ChowLiuTree tree, DTable dtable)
    : tree_(std::move(tree)), dtable_(std::move(dtable)) {
    if (tree_.vocab_size() != dtable_.vocab_size()) {
        throw DimensionError("tree vocabulary " + std::to_string(tree_.vocab_size()) +
                             " does not match d-table vocabulary " +
                             std::to_string(dtable_.vocab_size()));
    }
    children_ = tree_.children();
    inverted_index_.resize(static_cast<std::size_t>(tree_.vocab_size()));
}

int LocationMap::add_location(std::span<const std::uint8_t> bow_row) {
    check_row_length(bow_row.size(), vocab_size(), "location row");
    const int index = size();
    double default_loglik = 0.0;
    for (int q = 0; q < vocab_size(); ++q) {
        if (bow_row[static_cast<std::size_t>(q)]) {
            default_loglik += dtable_.d1[static_cast<std::size_t>(q)];
            inverted_index_[static_cast<std::size_t>(q)].push_back(index);
        }
    }
    rows_.emplace_back(bow_row.begin(), bow_row.end());
    defaults_.push_back(default_loglik);
    return index;
}

std::vector<double> LocationMap::query_likelihoods(
    std::span<const std::uint8_t> query) const {
    check_row_length(query.size(), vocab_size(), "query row");

    std::vector<double> likelihoods = defaults_;
    for (int q = 0; q < vocab_size(); ++q) {
        if (!query[static_cast<std::size_t>(q)]) continue;

        // Observed word: adjust every location containing it, picking d4 or d3
        // by whether the parent word is also observed (the root has none).
        const int parent = tree_.parent[static_cast<std::size_t>(q)];
        const bool parent_observed = parent >= 0 && query[static_cast<std::size_t>(parent)];
        const double adjust = parent_observed ? dtable_.d4[static_cast<std::size_t>(q)]
                                              : dtable_.d3[static_cast<std::size_t>(q)];
        for (const int loc : inverted_index_[static_cast<std::size_t>(q)]) {
            likelihoods[static_cast<std::size_t>(loc)] += adjust;
        }

        // Unobserved children of an observed word: d2 correction for every
        // location containing the child.
        for (const int child : children_[static_cast<std::size_t>(q)]) {
            if (query[static_cast<std::size_t>(child)]) continue;
            const double d2 = dtable_.d2[static_cast<std::size_t>(child)];
            for (const int loc : inverted_index_[static_cast<std::size_t>(child)]) {
                likelihoods[static_cast<std::size_t>(loc)] += d2;
            }
        }
    }
    return likelihoods;
}

double dense_likelihood(const ChowLiuTree& tree, const DTable& dtable,
                        std::span<const std::uint8_t> location_bow,
                        std::span<const std::uint8_t> query) {
    const int vocab = tree.vocab_size();
    check_row_length(location_bow.size(), vocab, "location row");
    check_row_length(query.size(), vocab, "query row");

    double loglik = 0.0;
    for (int q = 0; q < vocab; ++q) {
        if (!location_bow[static_cast<std::size_t>(q)]) continue;
        loglik += dtable.d1[static_cast<std::size_t>(q)];

        const int parent = tree.parent[static_cast<std::size_t>(q)];
        const bool parent_observed = parent >= 0 && query[static_cast<std::size_t>(parent)];
        if (query[static_cast<std::size_t>(q)]) {
            loglik += parent_observed ? dtable.d4[static_cast<std::size_t>(q)]
                                      : dtable.d3[static_cast<std::size_t>(q)];
        } else if (parent_observed) {
            loglik += dtable.d2[static_cast<std::size_t>(q)];
        }
    }
    return loglik;
}

double new_place_likelihood(const ChowLiuTree& tree, const DTable& dtable,
                            std::span<const std::uint8_t> query) {
    std::vector<std::uint8_t> avg_row(static_cast<std::size_t>(tree.vocab_size()));
    for (int q = 0; q < tree.vocab_size(); ++q) {
        avg_row[static_cast<std::size_t>(q)] =
            tree.p_marg[static_cast<std::size_t>(q)] >= 0.5 ? 1 : 0;
    }
    return dense_likelihood(tree, dtable, avg_row, query);
}

std::vector<MatchEntry> posterior(const std::vector<double>& logliks,
                                  double new_place_loglik, const FabmapParams& params) {
    for (const double ll : logliks) {
        if (!std::isfinite(ll)) throw NumericError("non-finite location log likelihood");
    }
    if (!std::isfinite(new_place_loglik)) {
        throw NumericError("non-finite new-place log likelihood");
    }

    const double p_new = std::clamp(params.p_new_prior, 1e-12, 1.0 - 1e-12);
    const std::size_t n = logliks.size();

    std::vector<MatchEntry> entries;
    entries.reserve(n + 1);
    if (n == 0) {
        entries.push_back({kNewPlace, new_place_loglik, 1.0});
        return entries;
    }

    const double log_prior_loc = std::log((1.0 - p_new) / static_cast<double>(n));
    const double log_prior_new = std::log(p_new);

    std::vector<double> scores(n + 1);
    for (std::size_t i = 0; i < n; ++i) scores[i] = logliks[i] + log_prior_loc;
    scores[n] = new_place_loglik + log_prior_new;

    const double max_score = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (double& s : scores) {
        s = std::exp(s - max_score);
        total += s;
    }

    for (std::size_t i = 0; i < n; ++i) {
        entries.push_back({static_cast<int>(i), logliks[i], scores[i] / total});
    }
    entries.push_back({kNewPlace, new_place_loglik, scores[n] / total});
    return entries;
}

SequenceResult run_sequence(const BowMatrix& bow_test, const ChowLiuTree& tree,
                            const DTable& dtable, const FabmapParams& params) {
    const int m = bow_test.image_count();
    if (m < 1) throw DataError("test bow matrix is empty");
    if (bow_test.vocab_size() != tree.vocab_size()) {
        throw DimensionError("bow vocabulary " + std::to_string(bow_test.vocab_size()) +
                             " does not match tree vocabulary " +
                             std::to_string(tree.vocab_size()));
    }

    LocationMap map(tree, dtable);
    SequenceResult result;
    result.confusion = Eigen::MatrixXd::Zero(m, m);
    result.decisions.reserve(static_cast<std::size_t>(m));
    result.matches.reserve(static_cast<std::size_t>(m));
    std::vector<int> location_of_image(static_cast<std::size_t>(m), kNewPlace);

    for (int i = 0; i < m; ++i) {
        const auto query = bow_test.binary_row(i);

        const auto logliks = map.query_likelihoods(query);
        const double np_loglik = new_place_likelihood(map.tree(), map.dtable(), query);
        MatchResult match;
        match.query_index = i;
        match.entries = posterior(logliks, np_loglik, params);

        // Row i: posterior of the location each earlier image belongs to.
        for (int j = 0; j < i; ++j) {
            const int loc = location_of_image[static_cast<std::size_t>(j)];
            result.confusion(i, j) = match.entries[static_cast<std::size_t>(loc)].probability;
        }

        // Best existing location, smallest index on ties.
        int best_loc = kNewPlace;
        double best_prob = -1.0;
        for (const auto& entry : match.entries) {
            if (entry.location == kNewPlace) continue;
            if (entry.probability > best_prob) {
                best_prob = entry.probability;
                best_loc = entry.location;
            }
        }
        const double new_place_prob = match.entries.back().probability;

        SequenceDecision decision;
        decision.image_id = bow_test.image_ids[static_cast<std::size_t>(i)];
        if (best_loc != kNewPlace && best_prob > params.lcd_threshold) {
            decision.is_loop = true;
            decision.location = best_loc;
            decision.probability = best_prob;
            location_of_image[static_cast<std::size_t>(i)] = best_loc;
        } else {
            decision.is_loop = false;
            decision.location = map.add_location(query);
            decision.probability = new_place_prob;
            location_of_image[static_cast<std::size_t>(i)] = decision.location;
        }
        result.decisions.push_back(std::move(decision));
        result.matches.push_back(std::move(match));
    }
    return result;
}

}  // namespace loopdet
