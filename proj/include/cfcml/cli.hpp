#pragma once
#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cfcml/report.hpp"
#include "cfcml/synth.hpp"
#include "cfcml/trainer.hpp"

namespace cfcml::cli {

namespace fs = std::filesystem;
using trainer::Granularity;
using trainer::ModelConfig;
using trainer::TrainConfig;

// Everything a run reads from its config file. Structural model fields
// (modality count, dims, attribute schema, class count) come from the
// dataset manifest, not from here.
struct RunConfig {
    fs::path data_root;
    fs::path out_dir = "runs/default";

    int base_channels = 8;
    int common_dim = 16;
    int heads = 2;
    int n_x = 8;
    int n_t = 6;
    Granularity granularity = Granularity::MG;
    bool mgcie = true;
    bool ccrm = true;
    std::vector<int> classifier_hidden = {64};
    double dropout = 0.5;

    TrainConfig train;

    std::string embedder = "hash";  // hash | precomputed
    fs::path embedder_file;

    std::string digest;  // set after parsing
};

inline std::string canonical_config_text(const RunConfig& rc) {
    kv::Pairs p;
    p.set("data_root", rc.data_root.string());
    p.set("out_dir", rc.out_dir.string());
    p.set("base_channels", std::to_string(rc.base_channels));
    p.set("common_dim", std::to_string(rc.common_dim));
    p.set("heads", std::to_string(rc.heads));
    p.set("n_x", std::to_string(rc.n_x));
    p.set("n_t", std::to_string(rc.n_t));
    p.set("granularity", trainer::granularity_name(rc.granularity));
    p.set("mgcie", rc.mgcie ? "true" : "false");
    p.set("ccrm", rc.ccrm ? "true" : "false");
    std::string hidden;
    for (std::size_t i = 0; i < rc.classifier_hidden.size(); ++i)
        hidden += (i ? "," : "") + std::to_string(rc.classifier_hidden[i]);
    p.set("classifier_hidden", hidden);
    p.set("dropout", kv::format_double(rc.dropout));
    p.set("lr0", kv::format_double(rc.train.lr0));
    p.set("epochs", std::to_string(rc.train.epochs));
    p.set("warmup_epochs", std::to_string(rc.train.warmup_epochs));
    p.set("decay_factor", kv::format_double(rc.train.decay_factor));
    p.set("decay_period", std::to_string(rc.train.decay_period));
    p.set("batch_size", std::to_string(rc.train.batch_size));
    p.set("weight_decay", kv::format_double(rc.train.weight_decay));
    p.set("seed", std::to_string(rc.train.seed));
    p.set("alpha", kv::format_double(rc.train.contrast.alpha));
    p.set("beta", kv::format_double(rc.train.contrast.beta));
    p.set("gamma", kv::format_double(rc.train.contrast.gamma));
    p.set("tau", kv::format_double(rc.train.contrast.tau));
    p.set("tau_outside_exp", rc.train.contrast.tau_outside_exp ? "true" : "false");
    p.set("stop_grad_prototypes", rc.train.contrast.stop_grad_prototypes ? "true" : "false");
    p.set("up_negatives_same_modality_only",
          rc.train.contrast.up_negatives_same_modality_only ? "true" : "false");
    p.set("sample_positives_own_modality_only",
          rc.train.contrast.sample_positives_own_modality_only ? "true" : "false");
    p.set("class_weighted_ce", rc.train.class_weighted_ce ? "true" : "false");
    std::string aug;
    if (rc.train.augment.gaussian_noise) aug += (aug.empty() ? "" : ",") + std::string("noise");
    if (rc.train.augment.random_crop) aug += (aug.empty() ? "" : ",") + std::string("crop");
    if (rc.train.augment.random_flip) aug += (aug.empty() ? "" : ",") + std::string("flip");
    if (rc.train.augment.random_erase) aug += (aug.empty() ? "" : ",") + std::string("erase");
    p.set("augment", aug.empty() ? "none" : aug);
    p.set("augment_sigma", kv::format_double(rc.train.augment.sigma));
    p.set("augment_crop_frac", kv::format_double(rc.train.augment.crop_frac));
    p.set("augment_erase_frac", kv::format_double(rc.train.augment.erase_frac));
    p.set("embedder", rc.embedder);
    p.set("embedder_file", rc.embedder_file.string());
    std::ostringstream os;
    for (const auto& [k, v] : p.items) os << k << " = " << v << "\n";
    return os.str();
}

inline std::string config_digest(const RunConfig& rc) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_config_text(rc))));
    return buf;
}

// Parses a `key = value` config file. Unknown keys are hard errors; the
// CFCML_SEED environment variable overrides the configured seed.
inline RunConfig parse_run_config(const fs::path& path) {
    kv::Pairs p = kv::parse_file(path);
    RunConfig rc;
    std::vector<std::string> consumed;
    auto take = [&](const std::string& key) -> const std::string* {
        const std::string* v = p.find(key);
        if (v) consumed.push_back(key);
        return v;
    };

    if (const auto* v = take("data_root")) rc.data_root = *v;
    if (const auto* v = take("out_dir")) rc.out_dir = *v;
    if (const auto* v = take("base_channels"))
        rc.base_channels = static_cast<int>(kv::parse_int(*v, "base_channels"));
    if (const auto* v = take("common_dim"))
        rc.common_dim = static_cast<int>(kv::parse_int(*v, "common_dim"));
    if (const auto* v = take("heads")) rc.heads = static_cast<int>(kv::parse_int(*v, "heads"));
    if (const auto* v = take("n_x")) rc.n_x = static_cast<int>(kv::parse_int(*v, "n_x"));
    if (const auto* v = take("n_t")) rc.n_t = static_cast<int>(kv::parse_int(*v, "n_t"));
    if (const auto* v = take("granularity")) rc.granularity = trainer::granularity_from_name(*v);
    if (const auto* v = take("mgcie")) rc.mgcie = kv::parse_bool(*v, "mgcie");
    if (const auto* v = take("ccrm")) rc.ccrm = kv::parse_bool(*v, "ccrm");
    if (const auto* v = take("classifier_hidden")) {
        rc.classifier_hidden.clear();
        for (const auto& h : kv::split_list(*v))
            rc.classifier_hidden.push_back(static_cast<int>(kv::parse_int(h, "classifier_hidden")));
    }
    if (const auto* v = take("dropout")) rc.dropout = kv::parse_double(*v, "dropout");
    if (const auto* v = take("lr0")) rc.train.lr0 = kv::parse_double(*v, "lr0");
    if (const auto* v = take("epochs"))
        rc.train.epochs = static_cast<int>(kv::parse_int(*v, "epochs"));
    if (const auto* v = take("warmup_epochs"))
        rc.train.warmup_epochs = static_cast<int>(kv::parse_int(*v, "warmup_epochs"));
    if (const auto* v = take("decay_factor"))
        rc.train.decay_factor = kv::parse_double(*v, "decay_factor");
    if (const auto* v = take("decay_period"))
        rc.train.decay_period = static_cast<int>(kv::parse_int(*v, "decay_period"));
    if (const auto* v = take("batch_size"))
        rc.train.batch_size = static_cast<int>(kv::parse_int(*v, "batch_size"));
    if (const auto* v = take("weight_decay"))
        rc.train.weight_decay = kv::parse_double(*v, "weight_decay");
    if (const auto* v = take("seed"))
        rc.train.seed = static_cast<std::uint64_t>(kv::parse_int(*v, "seed"));
    if (const auto* v = take("alpha")) rc.train.contrast.alpha = kv::parse_double(*v, "alpha");
    if (const auto* v = take("beta")) rc.train.contrast.beta = kv::parse_double(*v, "beta");
    if (const auto* v = take("gamma")) rc.train.contrast.gamma = kv::parse_double(*v, "gamma");
    if (const auto* v = take("tau")) rc.train.contrast.tau = kv::parse_double(*v, "tau");
    if (const auto* v = take("tau_outside_exp"))
        rc.train.contrast.tau_outside_exp = kv::parse_bool(*v, "tau_outside_exp");
    if (const auto* v = take("stop_grad_prototypes"))
        rc.train.contrast.stop_grad_prototypes = kv::parse_bool(*v, "stop_grad_prototypes");
    if (const auto* v = take("up_negatives_same_modality_only"))
        rc.train.contrast.up_negatives_same_modality_only =
            kv::parse_bool(*v, "up_negatives_same_modality_only");
    if (const auto* v = take("sample_positives_own_modality_only"))
        rc.train.contrast.sample_positives_own_modality_only =
            kv::parse_bool(*v, "sample_positives_own_modality_only");
    if (const auto* v = take("class_weighted_ce"))
        rc.train.class_weighted_ce = kv::parse_bool(*v, "class_weighted_ce");
    if (const auto* v = take("augment")) {
        if (*v != "none") {
            for (const auto& op : kv::split_list(*v)) {
                if (op == "noise") rc.train.augment.gaussian_noise = true;
                else if (op == "crop") rc.train.augment.random_crop = true;
                else if (op == "flip") rc.train.augment.random_flip = true;
                else if (op == "erase") rc.train.augment.random_erase = true;
                else throw ConfigError("unknown augmentation '" + op + "'");
            }
        }
    }
    if (const auto* v = take("augment_sigma"))
        rc.train.augment.sigma = kv::parse_double(*v, "augment_sigma");
    if (const auto* v = take("augment_crop_frac"))
        rc.train.augment.crop_frac = kv::parse_double(*v, "augment_crop_frac");
    if (const auto* v = take("augment_erase_frac"))
        rc.train.augment.erase_frac = kv::parse_double(*v, "augment_erase_frac");
    if (const auto* v = take("embedder")) {
        rc.embedder = *v;
        if (rc.embedder != "hash" && rc.embedder != "precomputed")
            throw ConfigError("embedder must be 'hash' or 'precomputed'");
    }
    if (const auto* v = take("embedder_file")) rc.embedder_file = *v;

    for (const auto& [k, v] : p.items)
        if (std::find(consumed.begin(), consumed.end(), k) == consumed.end())
            throw ConfigError(path.filename().string() + ": unknown key '" + k + "'");

    if (rc.data_root.empty()) throw ConfigError("config must set data_root");
    if (rc.embedder == "precomputed" && rc.embedder_file.empty())
        throw ConfigError("embedder = precomputed requires embedder_file");

    if (const char* env = std::getenv("CFCML_SEED"))
        rc.train.seed = static_cast<std::uint64_t>(kv::parse_int(env, "CFCML_SEED"));
    rc.digest = config_digest(rc);
    return rc;
}

inline ModelConfig materialize_model(const RunConfig& rc, const dataio::DatasetManifest& man) {
    ModelConfig mc;
    mc.mode = man.mode;
    mc.m = man.m();
    mc.image_dims = man.image_dims;
    mc.t = man.t();
    mc.n_classes = man.n_classes();
    mc.base_channels = rc.base_channels;
    mc.common_dim = rc.common_dim;
    mc.heads = rc.heads;
    mc.n_x = rc.n_x;
    mc.n_t = rc.n_t;
    mc.granularity = rc.granularity;
    mc.mgcie_enabled = rc.mgcie;
    mc.ccrm_enabled = rc.ccrm;
    mc.classifier_hidden = rc.classifier_hidden;
    mc.dropout = rc.dropout;
    mc.validate();
    return mc;
}

inline std::shared_ptr<const encoders::TabularEmbedder> make_embedder(const RunConfig& rc) {
    if (rc.embedder == "precomputed")
        return std::make_shared<encoders::PrecomputedEmbedder>(rc.embedder_file);
    return std::make_shared<encoders::HashEmbedder>();
}

namespace detail {

inline metrics::EvalReport report_from_eval(const trainer::EvalOutput& ev,
                                            const std::string& digest) {
    auto rep = metrics::compute_multiclass_metrics(ev.y_true, ev.y_pred, ev.probs);
    if (!ev.probs.empty() && ev.probs[0].size() == 2) {
        std::vector<double> scores;
        for (const auto& row : ev.probs) scores.push_back(row[1]);
        try {
            auto bin = metrics::compute_binary_metrics(ev.y_true, scores);
            rep.sen = bin.sen;
            rep.spe = bin.spe;
            rep.g_mean = bin.g_mean;
            rep.ba_acc = bin.ba_acc;
            rep.auprc = bin.auprc;
            rep.auc = bin.auc;
        } catch (const UndefinedMetric&) {
            // single-class truth: binary extras stay absent
        }
    }
    rep.config_digest = digest;
    return rep;
}

inline int class_stratified_fold(int rank_in_class, int folds) { return rank_in_class % folds; }

}  // namespace detail

inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"coarse-to-fine crossmodal learning on multimodal images and tabular data"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic crossmodal dataset");
    dataio::SynthConfig sc;
    std::string synth_out, synth_mode = "2d", synth_dims = "32x32";
    synth->add_option("--out", synth_out, "output dataset directory")->required();
    synth->add_option("--classes", sc.n_classes, "number of classes");
    synth->add_option("--per-class", sc.per_class_train, "train samples per class");
    synth->add_option("--val-per-class", sc.per_class_val, "val samples per class");
    synth->add_option("--test-per-class", sc.per_class_test, "test samples per class");
    synth->add_option("--modalities", sc.modalities, "image modalities per sample");
    synth->add_option("--mode", synth_mode, "2d or 3d");
    synth->add_option("--dims", synth_dims, "spatial dims, e.g. 32x32 or 16x16x16");
    synth->add_option("--channels", sc.channels, "image channels");
    synth->add_option("--attrs", sc.attributes, "tabular attribute count");
    synth->add_option("--seed", sc.seed, "generation seed");
    synth->add_option("--attr-noise", sc.attr_noise, "attribute corruption rate");
    synth->add_option("--noise-sigma", sc.noise_sigma, "image background noise");
    synth->add_option("--blob-amp", sc.blob_amp, "fine positional cue amplitude");
    synth->add_option("--tilt-amp", sc.tilt_amp, "coarse intensity cue amplitude");
    synth->add_option("--blob-radius", sc.blob_radius_frac,
                      "blob radius as a fraction of the mean extent");
    synth->add_option("--train-imbalance", sc.train_imbalance,
                      "geometric class imbalance of the train split");
    synth->add_flag("--coarse-attrs", sc.attr_coarse,
                    "attribute values identify class groups instead of classes");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
    std::string train_config, resume_path;
    train_cmd->add_option("--config", train_config, "run config file")->required();
    train_cmd->add_option("--resume", resume_path, "checkpoint to resume from");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string eval_config, eval_ckpt, eval_split = "val", eval_report;
    eval_cmd->add_option("--config", eval_config, "run config file")->required();
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--split", eval_split, "dataset split to evaluate");
    eval_cmd->add_option("--report", eval_report, "report output file")->required();

    // ---- gap ----
    auto* gap_cmd = app.add_subcommand("gap", "crossmodal gap diagnostic for a checkpoint");
    std::string gap_config, gap_ckpt, gap_split = "val", gap_report;
    gap_cmd->add_option("--config", gap_config, "run config file")->required();
    gap_cmd->add_option("--checkpoint", gap_ckpt, "checkpoint file")->required();
    gap_cmd->add_option("--split", gap_split, "dataset split");
    gap_cmd->add_option("--report", gap_report, "report output file")->required();

    // ---- cv ----
    auto* cv_cmd = app.add_subcommand("cv", "stratified cross-validation");
    std::string cv_config, cv_report;
    int cv_folds = 3;
    cv_cmd->add_option("--config", cv_config, "run config file")->required();
    cv_cmd->add_option("--folds", cv_folds, "fold count");
    cv_cmd->add_option("--report", cv_report, "report output file");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            std::cout << app.help() << std::endl;
            return 0;
        }
        std::cerr << e.what() << std::endl;
        return 1;
    }

    try {
        if (synth->parsed()) {
            sc.mode = dataio::mode_from_name(synth_mode);
            sc.spatial = kv::parse_dims(synth_dims, "--dims");
            dataio::generate_synthetic_dataset(synth_out, sc);
            std::cout << "wrote dataset to " << synth_out << std::endl;
            return 0;
        }

        if (train_cmd->parsed()) {
            RunConfig rc = parse_run_config(train_config);
            dataio::Dataset data = dataio::load_dataset(rc.data_root);
            trainer::CfcmlModel model(materialize_model(rc, data.manifest), rc.train.seed);
            model.embedder = make_embedder(rc);
            std::unique_ptr<trainer::Checkpoint> resume;
            if (!resume_path.empty())
                resume = std::make_unique<trainer::Checkpoint>(
                    trainer::load_checkpoint(resume_path));
            auto result = trainer::train(model, data, rc.train, &rc.out_dir, resume.get());
            for (const auto& rec : result.log)
                std::cout << trainer::epoch_record_line(rec) << std::endl;
            std::cout << "checkpoints written to " << rc.out_dir << std::endl;
            return 0;
        }

        if (eval_cmd->parsed()) {
            RunConfig rc = parse_run_config(eval_config);
            dataio::Dataset data = dataio::load_dataset(rc.data_root);
            trainer::CfcmlModel model(materialize_model(rc, data.manifest), rc.train.seed);
            model.embedder = make_embedder(rc);
            auto ckpt = trainer::load_checkpoint(eval_ckpt);
            trainer::restore(model, nullptr, ckpt);
            auto ev = trainer::evaluate(model, data.split(eval_split));
            auto rep = detail::report_from_eval(ev, rc.digest);
            kv::write_file(eval_report, metrics::eval_report_to_kv(rep));
            std::cout << "acc=" << kv::format_double(rep.acc)
                      << " macro_f1=" << kv::format_double(rep.macro_f1);
            if (rep.auc_macro_ovr) std::cout << " auc=" << kv::format_double(*rep.auc_macro_ovr);
            std::cout << std::endl;
            return 0;
        }

        if (gap_cmd->parsed()) {
            RunConfig rc = parse_run_config(gap_config);
            dataio::Dataset data = dataio::load_dataset(rc.data_root);
            trainer::CfcmlModel model(materialize_model(rc, data.manifest), rc.train.seed);
            model.embedder = make_embedder(rc);
            auto ckpt = trainer::load_checkpoint(gap_ckpt);
            trainer::restore(model, nullptr, ckpt);
            auto ev = trainer::evaluate(model, data.split(gap_split));
            auto rep = metrics::compute_gap_report(ev.pooled, ev.y_true);
            rep.config_digest = rc.digest;
            kv::write_file(gap_report, metrics::gap_report_to_kv(rep));
            std::cout << "intra=" << kv::format_double(rep.intra)
                      << " inter=" << kv::format_double(rep.inter)
                      << " gap=" << kv::format_double(rep.gap) << std::endl;
            return 0;
        }

        if (cv_cmd->parsed()) {
            if (cv_folds < 2) throw ConfigError("cv needs --folds >= 2");
            RunConfig rc = parse_run_config(cv_config);
            dataio::Dataset data = dataio::load_dataset(rc.data_root);

            // pool every split, then deal samples to folds stratified by class
            std::vector<dataio::MultimodalSample> all;
            for (const auto& split : data.manifest.splits)
                for (const auto& s : data.split(split)) all.push_back(s);
            std::vector<int> fold_of(all.size(), 0);
            {
                std::vector<int> rank(static_cast<std::size_t>(data.manifest.n_classes()), 0);
                // deterministic shuffle before dealing
                std::vector<std::size_t> order(all.size());
                for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                RngStream rng(mix_seed(rc.train.seed, 0xcf));
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[rng.next_below(i)]);
                for (std::size_t oi : order) {
                    const int c = all[oi].label;
                    fold_of[oi] = detail::class_stratified_fold(
                        rank[static_cast<std::size_t>(c)]++, cv_folds);
                }
            }

            kv::Pairs out;
            out.set("report_version", "1");
            out.set("kind", "cv");
            out.set("config_digest", rc.digest);
            out.set("folds", std::to_string(cv_folds));
            std::vector<double> accs, f1s, aucs;
            for (int f = 0; f < cv_folds; ++f) {
                dataio::Dataset fold_data;
                fold_data.manifest = data.manifest;
                std::vector<dataio::MultimodalSample> tr, va;
                for (std::size_t i = 0; i < all.size(); ++i)
                    (fold_of[i] == f ? va : tr).push_back(all[i]);
                fold_data.by_split["train"] = std::move(tr);
                fold_data.by_split["val"] = std::move(va);

                trainer::CfcmlModel model(materialize_model(rc, data.manifest),
                                          mix_seed(rc.train.seed, 0xf01d, f));
                model.embedder = make_embedder(rc);
                trainer::TrainConfig tc = rc.train;
                tc.seed = mix_seed(rc.train.seed, 0xf01d, f);
                trainer::train(model, fold_data, tc);
                auto ev = trainer::evaluate(model, fold_data.split("val"));
                auto rep = detail::report_from_eval(ev, rc.digest);
                const std::string prefix = "fold." + std::to_string(f) + ".";
                out.set(prefix + "n", std::to_string(rep.n));
                out.set(prefix + "acc", kv::format_double(rep.acc));
                out.set(prefix + "macro_f1", kv::format_double(rep.macro_f1));
                if (rep.auc_macro_ovr)
                    out.set(prefix + "auc", kv::format_double(*rep.auc_macro_ovr));
                accs.push_back(rep.acc);
                f1s.push_back(rep.macro_f1);
                if (rep.auc_macro_ovr) aucs.push_back(*rep.auc_macro_ovr);
                std::cout << "fold " << f << ": acc=" << kv::format_double(rep.acc)
                          << " macro_f1=" << kv::format_double(rep.macro_f1) << std::endl;
            }
            auto mean_std = [](const std::vector<double>& v) {
                double mean = 0.0;
                for (double x : v) mean += x;
                mean /= static_cast<double>(v.size());
                double var = 0.0;
                for (double x : v) var += (x - mean) * (x - mean);
                var /= static_cast<double>(v.size());
                return std::pair<double, double>{mean, std::sqrt(var)};
            };
            auto [am, as] = mean_std(accs);
            auto [fm, fs2] = mean_std(f1s);
            out.set("mean.acc", kv::format_double(am));
            out.set("std.acc", kv::format_double(as));
            out.set("mean.macro_f1", kv::format_double(fm));
            out.set("std.macro_f1", kv::format_double(fs2));
            if (!aucs.empty()) {
                auto [um, us] = mean_std(aucs);
                out.set("mean.auc", kv::format_double(um));
                out.set("std.auc", kv::format_double(us));
            }
            if (!cv_report.empty()) kv::write_file(cv_report, out);
            std::cout << "cv mean acc=" << kv::format_double(am)
                      << " macro_f1=" << kv::format_double(fm) << std::endl;
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const InvalidDims& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const EmptyValue& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const UnknownAttribute& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << std::endl;
        return 2;
    }
    return 1;
}

}  // namespace cfcml::cli
