// loopdet: self-supervised bag-of-words loop closure detection.
//
// Pipeline commands: train-codebook -> build-bow -> train-cltree ->
// run-fabmap | run-bow -> eval. `synth` generates synthetic datasets for
// demos and benchmarks. All randomness is seeded; identical flags and inputs
// produce bit-identical artifacts.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loopdet/bowsim.hpp"
#include "loopdet/cae.hpp"
#include "loopdet/chowliu.hpp"
#include "loopdet/codebook.hpp"
#include "loopdet/dataio.hpp"
#include "loopdet/errors.hpp"
#include "loopdet/eval.hpp"
#include "loopdet/fabmap.hpp"
#include "loopdet/rng.hpp"

namespace {

using namespace loopdet;

// Exit codes: 0 success, 2 usage/config, 3 data/format, 4 numeric.
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Carries the pipeline stage name into error reports.
struct StageError {
    std::string stage;
    int exit_code;
    std::string message;
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw StageError{name, kExitUsage, std::string("ConfigError: ") + e.what()};
    } catch (const ArgumentError& e) {
        throw StageError{name, kExitUsage, std::string("ArgumentError: ") + e.what()};
    } catch (const NumericError& e) {
        throw StageError{name, kExitNumeric, std::string("NumericError: ") + e.what()};
    } catch (const FormatError& e) {
        throw StageError{name, kExitData, std::string("FormatError: ") + e.what()};
    } catch (const DataError& e) {
        throw StageError{name, kExitData, std::string("DataError: ") + e.what()};
    } catch (const IoError& e) {
        throw StageError{name, kExitData, std::string("IoError: ") + e.what()};
    } catch (const UndefinedMetric& e) {
        throw StageError{name, kExitData, std::string("UndefinedMetric: ") + e.what()};
    } catch (const DimensionError& e) {
        throw StageError{name, kExitData, std::string("DimensionError: ") + e.what()};
    }
}

// "0.1:0.9:0.1" (inclusive range) or a comma separated list.
std::vector<double> parse_thresholds(const std::string& text) {
    std::vector<double> values;
    if (text.find(':') != std::string::npos) {
        double start, stop, step;
        char c1, c2;
        std::istringstream ss(text);
        if (!(ss >> start >> c1 >> stop >> c2 >> step) || c1 != ':' || c2 != ':' ||
            step <= 0.0) {
            throw ConfigError("bad threshold range '" + text + "' (want start:stop:step)");
        }
        const int n = static_cast<int>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (int i = 0; i < n; ++i) values.push_back(start + i * step);
    } else {
        std::istringstream ss(text);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("bad threshold '" + cell + "'");
            }
        }
    }
    if (values.empty()) throw ConfigError("no thresholds given");
    return values;
}

struct TrainCodebookOpts {
    std::string input;
    std::string method = "kmeans";
    int k = 1024;
    std::uint64_t seed = 0;
    int pca_dim = 0;
    std::string out;
    std::string out_pca, out_cae, out_loss;
    int epochs = 30;
    int batch = 64;
    double lr = 1e-3;
    int max_iters = 100;
    double tol = 1e-4;
};

int cmd_train_codebook(const TrainCodebookOpts& opt) {
    auto ds = stage("input", [&] { return load_descriptors(opt.input); });

    std::optional<PcaModel> pca;
    if (opt.pca_dim > 0) {
        pca = stage("pca", [&] { return fit_pca(ds, opt.pca_dim); });
        ds = stage("pca", [&] { return apply_pca(*pca, ds); });
        const auto path = opt.out_pca.empty() ? opt.out + ".pca" : opt.out_pca;
        stage("pca", [&] { save_pca(*pca, path); return 0; });
        std::cerr << "wrote pca model to " << path << "\n";
    }

    Codebook cb;
    double final_loss = 0.0;
    if (opt.method == "kmeans") {
        cb = stage("kmeans", [&] {
            return kmeans_train(ds, opt.k, opt.seed, opt.max_iters, opt.tol);
        });
    } else if (opt.method == "cae") {
        const auto [normalized, scale] =
            stage("normalize", [&] { return normalize_descriptors(ds); });
        auto model = stage("cae-init", [&] { return init_cae(ds.dim(), opt.seed); });
        TrainConfig cfg;
        cfg.epochs = opt.epochs;
        cfg.batch_size = opt.batch;
        cfg.learning_rate = opt.lr;
        cfg.seed = opt.seed;
        const auto history =
            stage("cae-train", [&] { return train_cae(model, normalized, cfg); });
        final_loss = history.empty() ? 0.0 : history.back();

        const auto labels = stage("cae-labels", [&] {
            return ae_labels(model, normalized, opt.k, opt.seed);
        });
        int n_empty = 0;
        cb = stage("centroids", [&] {
            return centroids_from_labels(ds, labels, opt.k, &n_empty);
        });
        if (n_empty > 0) {
            std::cerr << "warning: " << n_empty
                      << " clusters were empty; centroids fall back to the global mean\n";
        }

        const auto cae_path = opt.out_cae.empty() ? opt.out + ".cae" : opt.out_cae;
        const auto loss_path = opt.out_loss.empty() ? opt.out + ".loss.csv" : opt.out_loss;
        stage("output", [&] {
            save_cae(model, cae_path);
            save_loss_csv(history, loss_path);
            return 0;
        });
        std::cerr << "wrote cae model to " << cae_path << ", loss history to "
                  << loss_path << "\n";
    } else {
        throw StageError{"config", kExitUsage,
                         "ConfigError: unknown method '" + opt.method + "'"};
    }

    stage("output", [&] { save_codebook(cb, opt.out); return 0; });
    std::cout << "N=" << ds.total_descriptors() << " D=" << ds.dim() << " k=" << opt.k
              << " final_loss=" << final_loss << "\n";
    return 0;
}

struct BuildBowOpts {
    std::string descriptors, codebook, pca, out;
};

int cmd_build_bow(const BuildBowOpts& opt) {
    auto ds = stage("input", [&] { return load_descriptors(opt.descriptors); });
    const auto cb = stage("codebook", [&] { return load_codebook(opt.codebook); });
    if (!opt.pca.empty()) {
        const auto model = stage("pca", [&] { return load_pca(opt.pca); });
        ds = stage("pca", [&] { return apply_pca(model, ds); });
    }
    const auto bow = stage("quantize", [&] { return build_bow(cb, ds); });
    stage("output", [&] { save_bow(bow, opt.out); return 0; });
    std::cout << "M=" << bow.image_count() << " C=" << bow.vocab_size() << "\n";
    return 0;
}

struct TrainCltreeOpts {
    std::string bow, out;
};

int cmd_train_cltree(const TrainCltreeOpts& opt) {
    const auto bow = stage("input", [&] { return load_bow(opt.bow); });
    const auto tree = stage("chowliu", [&] { return learn_cltree(bow); });
    stage("output", [&] { save_cltree(tree, opt.out); return 0; });
    std::cout << "C=" << tree.vocab_size() << " root=" << tree.root << "\n";
    return 0;
}

struct RunFabmapOpts {
    std::string test_descriptors, codebook, cltree, train_bow, pca;
    double threshold = 0.999;
    double p_new = 0.9;
    double p_obs = 0.39;
    std::string out_confusion, out_decisions;
};

int cmd_run_fabmap(const RunFabmapOpts& opt) {
    const auto cb = stage("codebook", [&] { return load_codebook(opt.codebook); });

    std::optional<BowMatrix> train_bow;
    if (!opt.train_bow.empty()) {
        train_bow = stage("train-bow", [&] { return load_bow(opt.train_bow); });
    }

    ChowLiuTree tree;
    if (!opt.cltree.empty()) {
        tree = stage("cltree", [&] { return load_cltree(opt.cltree); });
    } else if (train_bow) {
        tree = stage("cltree", [&] { return learn_cltree(*train_bow); });
    } else {
        throw StageError{"config", kExitUsage,
                         "ConfigError: need --cltree or --train-bow to obtain a tree"};
    }

    stage("config", [&] {
        if (tree.vocab_size() != cb.size()) {
            throw ConfigError("codebook has " + std::to_string(cb.size()) +
                              " words but tree has " + std::to_string(tree.vocab_size()));
        }
        if (train_bow && train_bow->vocab_size() != cb.size()) {
            throw ConfigError("codebook has " + std::to_string(cb.size()) +
                              " words but train bow has " +
                              std::to_string(train_bow->vocab_size()));
        }
        if (opt.threshold < 0.0 || opt.p_new <= 0.0 || opt.p_new >= 1.0 ||
            opt.p_obs <= 0.0 || opt.p_obs >= 1.0) {
            throw ConfigError("thresholds and probabilities must lie in (0,1)");
        }
        return 0;
    });

    auto ds = stage("input", [&] { return load_descriptors(opt.test_descriptors); });
    if (!opt.pca.empty()) {
        const auto model = stage("pca", [&] { return load_pca(opt.pca); });
        ds = stage("pca", [&] { return apply_pca(model, ds); });
    }
    const auto bow = stage("quantize", [&] { return build_bow(cb, ds); });

    const DetectorModel det{opt.p_obs, 1.0 - opt.p_obs};
    const auto dtable = stage("dtable", [&] { return precompute_d(tree, det); });

    FabmapParams params;
    params.lcd_threshold = opt.threshold;
    params.p_new_prior = opt.p_new;
    const auto result =
        stage("fabmap", [&] { return run_sequence(bow, tree, dtable, params); });

    stage("output", [&] {
        save_confusion_csv(result.confusion, opt.out_confusion);
        std::ofstream out(opt.out_decisions, std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + opt.out_decisions);
        out << "image_id,decision,matched_location,posterior\n";
        char buf[64];
        for (const auto& d : result.decisions) {
            std::snprintf(buf, sizeof(buf), "%.9g", d.probability);
            out << d.image_id << ',' << (d.is_loop ? "loop" : "new") << ',' << d.location
                << ',' << buf << '\n';
        }
        if (!out) throw IoError("write failed: " + opt.out_decisions);
        return 0;
    });

    int loops = 0;
    for (const auto& d : result.decisions) loops += d.is_loop ? 1 : 0;
    std::cout << "images=" << result.decisions.size() << " loops=" << loops << "\n";
    return 0;
}

struct RunBowOpts {
    std::string test_descriptors, codebook, pca, out_confusion;
};

int cmd_run_bow(const RunBowOpts& opt) {
    const auto cb = stage("codebook", [&] { return load_codebook(opt.codebook); });
    auto ds = stage("input", [&] { return load_descriptors(opt.test_descriptors); });
    if (!opt.pca.empty()) {
        const auto model = stage("pca", [&] { return load_pca(opt.pca); });
        ds = stage("pca", [&] { return apply_pca(model, ds); });
    }
    const auto bow = stage("quantize", [&] { return build_bow(cb, ds); });
    const auto sim = stage("cosine", [&] { return cosine_confusion(bow); });
    stage("output", [&] { save_confusion_csv(sim, opt.out_confusion); return 0; });
    std::cout << "images=" << bow.image_count() << "\n";
    return 0;
}

struct EvalOpts {
    std::string confusion, ground_truth, thresholds = "0.1:0.9:0.1", out;
    int guard = 0;
};

int cmd_eval(const EvalOpts& opt) {
    ConfusionMatrix cm;
    cm.scores = stage("confusion", [&] { return load_confusion_csv(opt.confusion); });
    cm.guard = opt.guard;
    const auto gt = stage("ground-truth", [&] { return load_ground_truth(opt.ground_truth); });
    const auto thresholds = stage("config", [&] { return parse_thresholds(opt.thresholds); });
    const auto rows = stage("eval", [&] { return sweep(cm, gt, thresholds); });
    if (!opt.out.empty()) {
        stage("output", [&] { save_sweep_csv(rows, opt.out); return 0; });
    }
    std::cout << "threshold,recall,accuracy\n";
    for (const auto& row : rows) {
        std::cout << row.threshold << ',' << row.recall << ',' << row.accuracy << "\n";
    }
    return 0;
}

struct SynthOpts {
    int dim = 16;
    int vocab = 16;
    int places = 4;
    int words_per_place = 5;
    int train_images = 200;
    int test_images = 40;
    int desc_per_word = 3;
    double noise = 0.02;
    double revisit = 0.3;
    std::uint64_t seed = 0;
    std::string out_train, out_test, out_gt;
};

// Synthetic "places" built from shared word prototypes. Training images give
// every word a hub-correlated occurrence pattern so the learned dependency
// tree is informative; test images walk the places with revisits.
int cmd_synth(const SynthOpts& opt) {
    if (opt.vocab < opt.places * opt.words_per_place + 1) {
        throw StageError{"config", kExitUsage,
                         "ConfigError: vocab must cover places*words_per_place + 1 hub word"};
    }
    Rng rng(opt.seed);

    // Prototype per word, uniformly placed.
    std::vector<Eigen::VectorXd> protos;
    for (int q = 0; q < opt.vocab; ++q) {
        Eigen::VectorXd p(opt.dim);
        for (int j = 0; j < opt.dim; ++j) p(j) = rng.uniform(0.1, 0.9);
        protos.push_back(p);
    }

    auto emit_word = [&](Eigen::MatrixXd& rows, int& cursor, int q) {
        for (int d = 0; d < opt.desc_per_word; ++d) {
            for (int j = 0; j < opt.dim; ++j) {
                rows(cursor, j) = protos[static_cast<std::size_t>(q)](j) +
                                  opt.noise * rng.normal();
            }
            ++cursor;
        }
    };

    // Training set: hub word 0 in half the images; every other word occurs
    // with probability 0.45 when the hub is present, 0.03 otherwise.
    std::vector<ImageDescriptors> train;
    for (int i = 0; i < opt.train_images; ++i) {
        std::vector<int> words;
        const bool hub = rng.uniform() < 0.5;
        if (hub) words.push_back(0);
        for (int q = 1; q < opt.vocab; ++q) {
            if (rng.uniform() < (hub ? 0.45 : 0.03)) words.push_back(q);
        }
        Eigen::MatrixXd rows(static_cast<int>(words.size()) * opt.desc_per_word, opt.dim);
        int cursor = 0;
        for (const int q : words) emit_word(rows, cursor, q);
        train.push_back({"train" + std::to_string(i), std::move(rows)});
    }
    stage("output", [&] {
        save_descriptors(DescriptorSet(opt.dim, std::move(train)), opt.out_train);
        return 0;
    });

    // Test sequence over places; place p owns words [1 + p*w, 1 + (p+1)*w).
    std::vector<int> place_of_image;
    std::vector<ImageDescriptors> test;
    for (int i = 0; i < opt.test_images; ++i) {
        int place;
        if (!place_of_image.empty() && rng.uniform() < opt.revisit) {
            place = place_of_image[static_cast<std::size_t>(
                rng.uniform_int(place_of_image.size()))];
        } else {
            place = static_cast<int>(rng.uniform_int(opt.places));
        }
        place_of_image.push_back(place);
        Eigen::MatrixXd rows(opt.words_per_place * opt.desc_per_word, opt.dim);
        int cursor = 0;
        for (int w = 0; w < opt.words_per_place; ++w) {
            emit_word(rows, cursor, 1 + place * opt.words_per_place + w);
        }
        test.push_back({"test" + std::to_string(i), std::move(rows)});
    }
    stage("output", [&] {
        save_descriptors(DescriptorSet(opt.dim, std::move(test)), opt.out_test);
        return 0;
    });

    stage("output", [&] {
        std::ofstream out(opt.out_gt, std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + opt.out_gt);
        for (int i = 0; i < opt.test_images; ++i) {
            for (int j = 0; j < opt.test_images; ++j) {
                const bool same = j < i && place_of_image[static_cast<std::size_t>(i)] ==
                                               place_of_image[static_cast<std::size_t>(j)];
                out << (same ? 1 : 0);
                if (j + 1 < opt.test_images) out << ',';
            }
            out << '\n';
        }
        if (!out) throw IoError("write failed: " + opt.out_gt);
        return 0;
    });

    std::cout << "train_images=" << opt.train_images << " test_images=" << opt.test_images
              << " vocab=" << opt.vocab << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised bag-of-words loop closure detection"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "key=value config file with one [section] per subcommand; explicit flags win");

    TrainCodebookOpts tc;
    auto* tc_cmd = app.add_subcommand("train-codebook",
                                      "Build a vocabulary from training descriptors");
    tc_cmd->configurable();
    tc_cmd->add_option("--input", tc.input, "DSC1 training descriptors")->required();
    tc_cmd->add_option("--method", tc.method, "kmeans | cae")
        ->check(CLI::IsMember({"kmeans", "cae"}));
    tc_cmd->add_option("--k", tc.k, "vocabulary size");
    tc_cmd->add_option("--seed", tc.seed, "random seed");
    tc_cmd->add_option("--pca-dim", tc.pca_dim, "PCA output dimension (0 = no PCA)");
    tc_cmd->add_option("--out", tc.out, "output CBK1 codebook")->required();
    tc_cmd->add_option("--out-pca", tc.out_pca, "output PCA1 model (default <out>.pca)");
    tc_cmd->add_option("--out-cae", tc.out_cae, "output CAE1 model (default <out>.cae)");
    tc_cmd->add_option("--out-loss", tc.out_loss, "loss CSV (default <out>.loss.csv)");
    tc_cmd->add_option("--epochs", tc.epochs, "cae training epochs");
    tc_cmd->add_option("--batch", tc.batch, "cae batch size");
    tc_cmd->add_option("--lr", tc.lr, "cae learning rate");
    tc_cmd->add_option("--max-iters", tc.max_iters, "kmeans iteration cap");
    tc_cmd->add_option("--tol", tc.tol, "kmeans centroid shift tolerance");

    BuildBowOpts bb;
    auto* bb_cmd = app.add_subcommand("build-bow", "Quantize descriptors into a BOW1 matrix");
    bb_cmd->configurable();
    bb_cmd->add_option("--descriptors", bb.descriptors, "DSC1 input")->required();
    bb_cmd->add_option("--codebook", bb.codebook, "CBK1 codebook")->required();
    bb_cmd->add_option("--pca", bb.pca, "PCA1 model applied before quantization");
    bb_cmd->add_option("--out", bb.out, "output BOW1 file")->required();

    TrainCltreeOpts tcl;
    auto* tcl_cmd = app.add_subcommand("train-cltree",
                                       "Learn the word dependency tree from a BOW1 matrix");
    tcl_cmd->configurable();
    tcl_cmd->add_option("--bow", tcl.bow, "BOW1 training matrix")->required();
    tcl_cmd->add_option("--out", tcl.out, "output CLT1 tree")->required();

    RunFabmapOpts rf;
    auto* rf_cmd = app.add_subcommand("run-fabmap",
                                      "Sequential loop closure detection over test images");
    rf_cmd->configurable();
    rf_cmd->add_option("--test-descriptors", rf.test_descriptors, "DSC1 test set")->required();
    rf_cmd->add_option("--codebook", rf.codebook, "CBK1 codebook")->required();
    rf_cmd->add_option("--cltree", rf.cltree, "CLT1 tree (else learned from --train-bow)");
    rf_cmd->add_option("--train-bow", rf.train_bow, "BOW1 training matrix");
    rf_cmd->add_option("--pca", rf.pca, "PCA1 model applied before quantization");
    rf_cmd->add_option("--threshold", rf.threshold, "loop closure posterior threshold");
    rf_cmd->add_option("--p-new", rf.p_new, "prior mass of the new-place hypothesis");
    rf_cmd->add_option("--p-obs", rf.p_obs, "detector constant (paired with 1 - p-obs)");
    rf_cmd->add_option("--out-confusion", rf.out_confusion, "confusion CSV")->required();
    rf_cmd->add_option("--out-decisions", rf.out_decisions, "decision CSV")->required();

    RunBowOpts rb;
    auto* rb_cmd = app.add_subcommand("run-bow",
                                      "Cosine-similarity confusion matrix baseline");
    rb_cmd->configurable();
    rb_cmd->add_option("--test-descriptors", rb.test_descriptors, "DSC1 test set")->required();
    rb_cmd->add_option("--codebook", rb.codebook, "CBK1 codebook")->required();
    rb_cmd->add_option("--pca", rb.pca, "PCA1 model applied before quantization");
    rb_cmd->add_option("--out-confusion", rb.out_confusion, "confusion CSV")->required();

    EvalOpts ev;
    auto* ev_cmd = app.add_subcommand("eval", "Score a confusion matrix against ground truth");
    ev_cmd->configurable();
    ev_cmd->add_option("--confusion", ev.confusion, "confusion CSV")->required();
    ev_cmd->add_option("--ground-truth", ev.ground_truth, "0/1 CSV")->required();
    ev_cmd->add_option("--thresholds", ev.thresholds, "list or start:stop:step");
    ev_cmd->add_option("--guard", ev.guard, "temporal guard band |i-j| <= guard masked out");
    ev_cmd->add_option("--out", ev.out, "PR table CSV");

    SynthOpts sy;
    auto* sy_cmd = app.add_subcommand("synth", "Generate a synthetic place-sequence dataset");
    sy_cmd->configurable();
    sy_cmd->add_option("--dim", sy.dim, "descriptor dimension");
    sy_cmd->add_option("--vocab", sy.vocab, "number of word prototypes");
    sy_cmd->add_option("--places", sy.places, "number of distinct places");
    sy_cmd->add_option("--words-per-place", sy.words_per_place, "words per place");
    sy_cmd->add_option("--train-images", sy.train_images, "training image count");
    sy_cmd->add_option("--test-images", sy.test_images, "test sequence length");
    sy_cmd->add_option("--desc-per-word", sy.desc_per_word, "descriptors per present word");
    sy_cmd->add_option("--noise", sy.noise, "descriptor noise sigma");
    sy_cmd->add_option("--revisit", sy.revisit, "revisit probability per test image");
    sy_cmd->add_option("--seed", sy.seed, "random seed");
    sy_cmd->add_option("--out-train", sy.out_train, "output DSC1 training set")->required();
    sy_cmd->add_option("--out-test", sy.out_test, "output DSC1 test set")->required();
    sy_cmd->add_option("--out-gt", sy.out_gt, "output ground truth CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (tc_cmd->parsed()) return cmd_train_codebook(tc);
        if (bb_cmd->parsed()) return cmd_build_bow(bb);
        if (tcl_cmd->parsed()) return cmd_train_cltree(tcl);
        if (rf_cmd->parsed()) return cmd_run_fabmap(rf);
        if (rb_cmd->parsed()) return cmd_run_bow(rb);
        if (ev_cmd->parsed()) return cmd_eval(ev);
        if (sy_cmd->parsed()) return cmd_synth(sy);
    } catch (const StageError& e) {
        std::cerr << e.stage << ": " << e.message << "\n";
        return e.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
