#include "loopdet/chowliu.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "binio.hpp"

namespace loopdet {

namespace {

constexpr double kProbClamp = 1e-6;

double clamp_prob(double p) {
    return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

// Joint counts of (z_q, z_r) over the BoW rows.
struct JointCounts {
    // count[a][b] = #rows with z_q == a and z_r == b
    double count[2][2] = {{0, 0}, {0, 0}};
};

JointCounts joint_counts(const BowMatrix& bow, int q, int r) {
    JointCounts jc;
    for (int i = 0; i < bow.image_count(); ++i) {
        const int a = bow.binary(i, q) ? 1 : 0;
        const int b = bow.binary(i, r) ? 1 : 0;
        jc.count[a][b] += 1.0;
    }
    return jc;
}

double check_positive(double v, int q, const char* expr) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw NumericError(std::string("non-positive or non-finite intermediate '") + expr +
                           "' for word " + std::to_string(q) + " (value " +
                           std::to_string(v) + ")");
    }
    return v;
}

}  // namespace

std::vector<std::vector<int>> ChowLiuTree::children() const {
    std::vector<std::vector<int>> lists(parent.size());
    for (int q = 0; q < vocab_size(); ++q) {
        const int p = parent[static_cast<std::size_t>(q)];
        if (p >= 0) lists[static_cast<std::size_t>(p)].push_back(q);
    }
    return lists;
}

double mutual_information(const BowMatrix& bow, int q, int r) {
    if (q == r) throw ArgumentError("mutual information of word " + std::to_string(q) +
                                    " with itself");
    if (bow.image_count() < 1) throw DataError("bow matrix has no rows");

    const auto jc = joint_counts(bow, q, r);
    const double total = static_cast<double>(bow.image_count()) + 4.0;

    // Smoothed joint; marginals by summing it out, so I is a proper KL >= 0.
    double joint[2][2];
    double pq[2] = {0, 0};
    double pr[2] = {0, 0};
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            joint[a][b] = (jc.count[a][b] + 1.0) / total;
            pq[a] += joint[a][b];
            pr[b] += joint[a][b];
        }
    }

    double mi = 0.0;
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            if (joint[a][b] > 0.0) {
                mi += joint[a][b] * std::log(joint[a][b] / (pq[a] * pr[b]));
            }
        }
    }
    return std::max(mi, 0.0);
}

ChowLiuTree learn_cltree(const BowMatrix& bow) {
    const int vocab = bow.vocab_size();
    if (bow.image_count() < 2) throw DataError("chow-liu training needs at least 2 rows");
    if (vocab < 1) throw DataError("vocabulary must contain at least one word");

    ChowLiuTree tree;
    tree.parent.assign(static_cast<std::size_t>(vocab), -1);
    tree.root = 0;

    if (vocab > 1) {
        // Prim's from word 0 over the complete MI graph. Ties break toward the
        // smaller word index (both for the next node and for its attachment).
        std::vector<bool> in_tree(static_cast<std::size_t>(vocab), false);
        std::vector<double> best_w(static_cast<std::size_t>(vocab),
                                   -std::numeric_limits<double>::infinity());
        std::vector<int> best_parent(static_cast<std::size_t>(vocab), -1);
        in_tree[0] = true;
        for (int w = 1; w < vocab; ++w) {
            best_w[static_cast<std::size_t>(w)] = mutual_information(bow, w, 0);
            best_parent[static_cast<std::size_t>(w)] = 0;
        }
        for (int added = 1; added < vocab; ++added) {
            int next = -1;
            for (int w = 0; w < vocab; ++w) {
                if (in_tree[static_cast<std::size_t>(w)]) continue;
                if (next == -1 || best_w[static_cast<std::size_t>(w)] >
                                      best_w[static_cast<std::size_t>(next)]) {
                    next = w;
                }
            }
            in_tree[static_cast<std::size_t>(next)] = true;
            tree.parent[static_cast<std::size_t>(next)] = best_parent[static_cast<std::size_t>(next)];
            for (int w = 0; w < vocab; ++w) {
                if (in_tree[static_cast<std::size_t>(w)]) continue;
                const double mi = mutual_information(bow, w, next);
                if (mi > best_w[static_cast<std::size_t>(w)]) {
                    best_w[static_cast<std::size_t>(w)] = mi;
                    best_parent[static_cast<std::size_t>(w)] = next;
                }
            }
        }
    }

    // Marginals and parent conditionals under the same Laplace smoothing.
    const double m = static_cast<double>(bow.image_count());
    tree.p_marg.resize(static_cast<std::size_t>(vocab));
    tree.p_given_parent1.resize(static_cast<std::size_t>(vocab));
    tree.p_given_parent0.resize(static_cast<std::size_t>(vocab));
    for (int q = 0; q < vocab; ++q) {
        double present = 0.0;
        for (int i = 0; i < bow.image_count(); ++i) present += bow.binary(i, q) ? 1.0 : 0.0;
        const double marg = (present + 2.0) / (m + 4.0);

        const int p = tree.parent[static_cast<std::size_t>(q)];
        double g1 = marg;
        double g0 = marg;
        if (p >= 0) {
            const auto jc = joint_counts(bow, q, p);
            // P(z_q=1 | z_p=b) from the smoothed joint.
            g1 = (jc.count[1][1] + 1.0) / (jc.count[0][1] + jc.count[1][1] + 2.0);
            g0 = (jc.count[1][0] + 1.0) / (jc.count[0][0] + jc.count[1][0] + 2.0);
        }
        tree.p_marg[static_cast<std::size_t>(q)] = clamp_prob(marg);
        tree.p_given_parent1[static_cast<std::size_t>(q)] = clamp_prob(g1);
        tree.p_given_parent0[static_cast<std::size_t>(q)] = clamp_prob(g0);
    }
    return tree;
}

DTable precompute_d(const ChowLiuTree& tree, const DetectorModel& det) {
    const int vocab = tree.vocab_size();
    const double a = det.p_obs;  // 0.39 in the standard detector model
    const double b = det.q_obs;  // 0.61

    DTable dt;
    dt.d1.resize(static_cast<std::size_t>(vocab));
    dt.d2.resize(static_cast<std::size_t>(vocab));
    dt.d3.resize(static_cast<std::size_t>(vocab));
    dt.d4.resize(static_cast<std::size_t>(vocab));

    for (int q = 0; q < vocab; ++q) {
        const double pm = tree.p_marg[static_cast<std::size_t>(q)];
        const double p1 = tree.p_given_parent1[static_cast<std::size_t>(q)];
        const double p0 = tree.p_given_parent0[static_cast<std::size_t>(q)];

        const double d1_star =
            ((1.0 - pm) * b * (1.0 - p0)) /
            (pm * a * (1.0 - p0) + (1.0 - pm) * b * (1.0 - p0));
        const double d1 = std::log(check_positive(d1_star, q, "d1*"));

        const double d2_num = (pm * b * (1.0 - p1)) / ((1.0 - pm) * a * p1);
        const double d2_den =
            (pm * b * p1 * p1 * a) /
            (((1.0 - pm) * b * (1.0 - p1) + pm * a * p1) * (1.0 - a * pm));
        const double d2 =
            std::log(check_positive(d2_num / (1.0 - d2_den), q, "d2* = d2_num/(1-d2_den)")) - d1;

        const double d3_den = (b * pm * (1.0 - pm) * a * p0) /
                              ((1.0 - pm) * pm * b * (1.0 - p0));
        const double d3_num = ((1.0 - pm) * a * p0) /
                              ((1.0 - pm) * a * p0 + pm * b * (1.0 - p0));
        const double d3 =
            std::log(check_positive(d3_num / d3_den, q, "d3* = d3_num/d3_den")) - d1;

        const double d4_star = (pm * b) / (1.0 - a * pm);
        const double d4 = std::log(check_positive(d4_star, q, "d4*")) - d1;

        dt.d1[static_cast<std::size_t>(q)] = d1;
        dt.d2[static_cast<std::size_t>(q)] = d2;
        dt.d3[static_cast<std::size_t>(q)] = d3;
        dt.d4[static_cast<std::size_t>(q)] = d4;
    }
    return dt;
}

// CLT1: magic, u32 |C|, i32 parent[], f64 p_marg[], p_given_parent1[], p_given_parent0[].

void save_cltree(const ChowLiuTree& tree, const std::filesystem::path& path) {
    auto out = binio::open_out(path);
    binio::write_magic(out, "CLT1");
    binio::write_u32(out, static_cast<std::uint32_t>(tree.vocab_size()));
    for (const int p : tree.parent) binio::write_i32(out, p);
    for (const double v : tree.p_marg) binio::write_f64(out, v);
    for (const double v : tree.p_given_parent1) binio::write_f64(out, v);
    for (const double v : tree.p_given_parent0) binio::write_f64(out, v);
    if (!out) throw IoError("write failed: " + path.string());
}

ChowLiuTree load_cltree(const std::filesystem::path& path) {
    auto in = binio::open_in(path);
    binio::expect_magic(in, "CLT1", "chow-liu tree");
    const auto vocab = binio::read_u32(in, "vocabulary size");
    ChowLiuTree tree;
    tree.parent.resize(vocab);
    for (auto& p : tree.parent) p = binio::read_i32(in, "parent index");
    tree.p_marg.resize(vocab);
    for (auto& v : tree.p_marg) v = binio::read_f64(in, "marginal");
    tree.p_given_parent1.resize(vocab);
    for (auto& v : tree.p_given_parent1) v = binio::read_f64(in, "conditional");
    tree.p_given_parent0.resize(vocab);
    for (auto& v : tree.p_given_parent0) v = binio::read_f64(in, "conditional");
    binio::expect_eof(in, "CLT1");

    int root = -1;
    for (std::uint32_t q = 0; q < vocab; ++q) {
        if (tree.parent[q] == -1) {
            if (root != -1) throw DataError("chow-liu tree has multiple roots");
            root = static_cast<int>(q);
        } else if (tree.parent[q] < 0 || tree.parent[q] >= static_cast<int>(vocab)) {
            throw DataError("parent index out of range");
        }
    }
    if (vocab > 0 && root == -1) throw DataError("chow-liu tree has no root");
    tree.root = root < 0 ? 0 : root;
    return tree;
}

// DTB1: magic, u32 |C|, four f64 arrays d1..d4.

void save_dtable(const DTable& dt, const std::filesystem::path& path) {
    auto out = binio::open_out(path);
    binio::write_magic(out, "DTB1");
    binio::write_u32(out, static_cast<std::uint32_t>(dt.vocab_size()));
    for (const double v : dt.d1) binio::write_f64(out, v);
    for (const double v : dt.d2) binio::write_f64(out, v);
    for (const double v : dt.d3) binio::write_f64(out, v);
    for (const double v : dt.d4) binio::write_f64(out, v);
    if (!out) throw IoError("write failed: " + path.string());
}

DTable load_dtable(const std::filesystem::path& path) {
    auto in = binio::open_in(path);
    binio::expect_magic(in, "DTB1", "d-table");
    const auto vocab = binio::read_u32(in, "vocabulary size");
    DTable dt;
    dt.d1.resize(vocab);
    dt.d2.resize(vocab);
    dt.d3.resize(vocab);
    dt.d4.resize(vocab);
    for (auto& v : dt.d1) v = binio::read_f64(in, "d1");
    for (auto& v : dt.d2) v = binio::read_f64(in, "d2");
    for (auto& v : dt.d3) v = binio::read_f64(in, "d3");
    for (auto& v : dt.d4) v = binio::read_f64(in, "d4");
    binio::expect_eof(in, "DTB1");
    return dt;
}

}  // namespace loopdet
