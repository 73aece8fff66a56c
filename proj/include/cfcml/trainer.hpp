#pragma once
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cfcml/augment.hpp"
#include "cfcml/batching.hpp"
#include "cfcml/checkpoint.hpp"
#include "cfcml/loss.hpp"
#include "cfcml/metrics.hpp"
#include "cfcml/schedule.hpp"

namespace cfcml::trainer {

struct TrainConfig {
    double lr0 = 5e-4;
    int epochs = 30;
    int warmup_epochs = 5;
    double decay_factor = 0.8;
    int decay_period = 5;
    int batch_size = 36;
    double weight_decay = 1e-4;
    std::uint64_t seed = 7;
    ccrm::ContrastConfig contrast;
    bool class_weighted_ce = false;
    dataio::AugmentPolicy augment;

    ScheduleConfig schedule() const { return {lr0, warmup_epochs, decay_factor, decay_period}; }
};

inline double lr_at(int epoch, const TrainConfig& cfg) { return lr_at(epoch, cfg.schedule()); }

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    LossBundle loss;  // means over the epoch's batches, weighted by batch size
    std::optional<double> val_acc, val_macro_f1, val_auc;
};

inline std::string epoch_record_line(const EpochRecord& r) {
    std::ostringstream os;
    os << "epoch=" << r.epoch << " lr=" << kv::format_double(r.lr)
       << " l_cls=" << kv::format_double(r.loss.l_cls)
       << " l_sam=" << kv::format_double(r.loss.l_sam)
       << " l_up=" << kv::format_double(r.loss.l_up)
       << " l_cp=" << kv::format_double(r.loss.l_cp)
       << " total=" << kv::format_double(r.loss.total);
    if (r.val_acc) os << " val_acc=" << kv::format_double(*r.val_acc);
    if (r.val_macro_f1) os << " val_macro_f1=" << kv::format_double(*r.val_macro_f1);
    if (r.val_auc) os << " val_auc=" << kv::format_double(*r.val_auc);
    return os.str();
}

struct EvalOutput {
    std::vector<int> y_true;
    std::vector<int> y_pred;
    std::vector<std::vector<double>> probs;                 // n x K
    std::vector<std::vector<std::vector<double>>> pooled;   // [sample][modality][C_d]
};

// Deteministic inference pass: no parameter mutation, dropout disabled.
inline EvalOutput evaluate(CfcmlModel& model, const std::vector<dataio::MultimodalSample>& samples,
                           int eval_batch = 16) {
    EvalOutput out;
    for (std::size_t start = 0; start < samples.size();
         start += static_cast<std::size_t>(eval_batch)) {
        Graph g;
        std::vector<const dataio::MultimodalSample*> batch;
        for (std::size_t i = start;
             i < std::min(samples.size(), start + static_cast<std::size_t>(eval_batch)); ++i)
            batch.push_back(&samples[i]);
        ForwardResult fwd = model.forward(g, batch, /*training=*/false, nullptr);
        Mat probs = fwd.logits.val();
        Graph::softmax_rows_val(probs);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            out.y_true.push_back(batch[b]->label);
            int best = 0;
            std::vector<double> row(static_cast<std::size_t>(probs.cols));
            for (int c = 0; c < probs.cols; ++c) {
                row[static_cast<std::size_t>(c)] = probs(static_cast<int>(b), c);
                if (probs(static_cast<int>(b), c) > probs(static_cast<int>(b), best)) best = c;
            }
            out.y_pred.push_back(best);
            out.probs.push_back(std::move(row));
            std::vector<std::vector<double>> per_mod;
            for (const Var& v : fwd.pooled[b]) per_mod.push_back(v.val().a);
            out.pooled.push_back(std::move(per_mod));
        }
    }
    return out;
}

struct TrainResult {
    std::vector<EpochRecord> log;
    int best_epoch = 0;          // 0 when no validation split was available
    double best_metric = 0.0;    // validation AUC (accuracy when AUC undefined)
    Checkpoint last;
    std::optional<Checkpoint> best;
};

inline std::vector<double> inverse_frequency_weights(const std::vector<int>& labels,
                                                     int n_classes) {
    std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    std::vector<double> w(static_cast<std::size_t>(n_classes), 0.0);
    for (int c = 0; c < n_classes; ++c)
        if (counts[static_cast<std::size_t>(c)] > 0)
            w[static_cast<std::size_t>(c)] =
                static_cast<double>(labels.size()) /
                (static_cast<double>(n_classes) * counts[static_cast<std::size_t>(c)]);
    return w;
}

// Full training loop over the train split; evaluates the val split per epoch
// when present. Deterministic given (model config, seed): single-threaded
// math, fixed batch order, fixed rng substreams. `resume` restores parameters
// and optimizer state and continues the schedule after the stored epoch.
inline TrainResult train(CfcmlModel& model, const dataio::Dataset& data, const TrainConfig& cfg,
                         const std::filesystem::path* out_dir = nullptr,
                         const Checkpoint* resume = nullptr) {
    const auto& train_samples = data.split("train");
    if (train_samples.empty()) throw ConfigError("train split is empty");
    std::vector<int> labels;
    for (const auto& s : train_samples) labels.push_back(s.label);
    {
        std::set<int> classes(labels.begin(), labels.end());
        if (classes.size() < 2) throw SingleClassBatch("training needs >= 2 classes");
    }

    Adam opt(model.params(), cfg.weight_decay);
    RngStream dropout_rng(mix_seed(cfg.seed, 0xd20));
    RngStream augment_rng(mix_seed(cfg.seed, 0xa06));
    int start_epoch = 1;
    if (resume != nullptr) {
        restore(model, &opt, *resume);
        start_epoch = resume->epoch + 1;
        if (!resume->rng_state.empty())
            dropout_rng = RngStream::deserialize(resume->rng_state);
        augment_rng = RngStream(mix_seed(cfg.seed, 0xa06, start_epoch));
    }

    std::vector<double> class_weights;
    const std::vector<double>* weights_ptr = nullptr;
    if (cfg.class_weighted_ce) {
        class_weights = inverse_frequency_weights(labels, model.cfg.n_classes);
        weights_ptr = &class_weights;
    }

    const bool has_val = data.has_split("val") && !data.split("val").empty();
    TrainResult result;
    std::ofstream log_os;
    if (out_dir != nullptr) {
        std::filesystem::create_directories(*out_dir);
        log_os.open(*out_dir / "train_log.txt", std::ios::trunc);
    }

    for (int epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg);
        auto batches = dataio::make_batches(labels, cfg.batch_size,
                                            mix_seed(cfg.seed, 0xeac, epoch),
                                            /*require_multiclass=*/true);
        LossBundle epoch_loss;
        std::size_t seen = 0;
        for (const auto& batch : batches) {
            // augmented copies live for the duration of the batch
            std::vector<dataio::MultimodalSample> storage;
            std::vector<const dataio::MultimodalSample*> ptrs;
            std::vector<int> batch_labels;
            storage.reserve(batch.indices.size());
            for (int idx : batch.indices) {
                const auto& s = train_samples[static_cast<std::size_t>(idx)];
                if (cfg.augment.any())
                    storage.push_back(dataio::augment(s, cfg.augment, model.cfg.mode,
                                                      augment_rng));
                else
                    storage.push_back(s);
                batch_labels.push_back(s.label);
            }
            for (const auto& s : storage) ptrs.push_back(&s);

            Graph g;
            ForwardResult fwd = model.forward(g, ptrs, /*training=*/true, &dropout_rng);
            LossVars loss =
                total_loss(g, fwd, batch_labels, model.cfg, cfg.contrast, weights_ptr);
            opt.zero_grad();
            g.backward(loss.total);
            opt.step(lr);

            const LossBundle lb = loss.values();
            const double w = static_cast<double>(batch.indices.size());
            epoch_loss.l_cls += lb.l_cls * w;
            epoch_loss.l_sam += lb.l_sam * w;
            epoch_loss.l_up += lb.l_up * w;
            epoch_loss.l_cp += lb.l_cp * w;
            epoch_loss.total += lb.total * w;
            seen += batch.indices.size();
        }
        const double inv = 1.0 / static_cast<double>(seen);
        epoch_loss.l_cls *= inv;
        epoch_loss.l_sam *= inv;
        epoch_loss.l_up *= inv;
        epoch_loss.l_cp *= inv;
        epoch_loss.total *= inv;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.loss = epoch_loss;
        if (has_val) {
            EvalOutput ev = evaluate(model, data.split("val"));
            auto rep = metrics::compute_multiclass_metrics(ev.y_true, ev.y_pred, ev.probs);
            rec.val_acc = rep.acc;
            rec.val_macro_f1 = rep.macro_f1;
            if (rep.auc_macro_ovr) rec.val_auc = *rep.auc_macro_ovr;
            const double metric = rec.val_auc ? *rec.val_auc : rep.acc;
            if (!result.best || metric > result.best_metric) {
                result.best_metric = metric;
                result.best_epoch = epoch;
                result.best = snapshot(model, &opt, epoch, dropout_rng.serialize());
            }
        }
        result.log.push_back(rec);
        if (log_os.is_open()) log_os << epoch_record_line(rec) << "\n";
    }

    result.last = snapshot(model, &opt, cfg.epochs, dropout_rng.serialize());
    if (out_dir != nullptr) {
        save_checkpoint(*out_dir / "last.ckpt", result.last);
        if (result.best) save_checkpoint(*out_dir / "best.ckpt", *result.best);
        log_os.close();
    }
    return result;
}

}  // namespace cfcml::trainer
