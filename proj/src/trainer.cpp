#include "ecgicd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "ecgicd/scoring.hpp"

namespace ecgicd::train {

models::Act<float> sample_crop(const signal::Ecg& record, std::size_t crop_len, DetRng& rng) {
    const std::size_t len = record.n_samples();
    if (len < crop_len) throw RecordTooShort();
    const std::size_t start = static_cast<std::size_t>(rng.below(len - crop_len + 1));
    models::Act<float> out(1, record.n_leads(), crop_len);
    for (std::size_t l = 0; l < record.n_leads(); ++l) {
        const float* src = record.samples[l].data() + start;
        std::copy(src, src + crop_len, out.row(0, l));
    }
    return out;
}

void adamw_step(std::vector<float>& theta, const std::vector<float>& grad, models::AdamSlot& slot,
                std::uint64_t t, const TrainConfig& cfg) {
    if (slot.m.size() != theta.size()) slot.m.assign(theta.size(), 0.0f);
    if (slot.v.size() != theta.size()) slot.v.assign(theta.size(), 0.0f);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i];
        const double m = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * g * g;
        slot.m[i] = static_cast<float>(m);
        slot.v[i] = static_cast<float>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        const double update =
            cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * theta[i]);
        const double next = theta[i] - update;
        if (!std::isfinite(next)) throw NonFiniteUpdate();
        theta[i] = static_cast<float>(next);
    }
}

void save_train_log(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(10);
    for (const auto& e : log) {
        out << "{\"epoch\":" << e.epoch << ",\"train_loss\":" << e.train_loss
            << ",\"val_macro_auroc\":" << e.val_macro_auroc << ",\"wall_ms\":" << e.wall_ms
            << "}\n";
    }
}

TrainResult train(const models::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const data::LabeledDataset& train_view, const data::LabeledDataset& val_view,
                  const SignalStore& signals) {
    if (train_view.records.empty()) throw data::EmptySplit("train");
    if (val_view.records.empty()) throw data::EmptySplit("validation");

    auto model = models::build_model<float>(model_cfg);
    auto params = model->params();
    std::map<std::string, models::AdamSlot> opt_state;
    std::uint64_t t = 0;

    DetRng loop_rng = DetRng::stream(cfg.seed, 1);  // shuffles + crop starts

    TrainResult result;
    double best_val = -1.0;

    std::vector<std::size_t> order(train_view.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        loop_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            const std::size_t bs = std::min<std::size_t>(cfg.batch_size, order.size() - pos);
            const auto& first = signals.at(train_view.records[order[pos]].signal_index);
            models::Act<float> batch(bs, first.n_leads(), cfg.crop_len);
            models::Mat<float> targets(bs, train_view.label_set.size());
            for (std::size_t b = 0; b < bs; ++b) {
                const std::size_t rec_idx = order[pos + b];
                const auto& rec = train_view.records[rec_idx];
                const auto& sig = signals.at(rec.signal_index);
                if (sig.n_samples() < cfg.crop_len) throw RecordTooShort();
                const std::size_t start =
                    static_cast<std::size_t>(loop_rng.below(sig.n_samples() - cfg.crop_len + 1));
                for (std::size_t l = 0; l < sig.n_leads(); ++l) {
                    const float* src = sig.samples[l].data() + start;
                    std::copy(src, src + cfg.crop_len, batch.row(b, l));
                }
                for (const auto col : rec.label_cols(train_view.label_source))
                    targets.at(b, col) = 1.0f;
            }
            const float loss = models::model_gradient(*model, batch, targets, /*train=*/true);
            if (!std::isfinite(loss)) throw Diverged();
            loss_sum += static_cast<double>(loss) * static_cast<double>(bs);
            loss_count += bs;
            ++t;
            for (auto* p : params) {
                if (!p->trainable) continue;
                adamw_step(p->w.v, p->g.v, opt_state[p->name], t, cfg);
            }
        }

        // Validation follows the test protocol: first-ECG view upstream,
        // crop-averaged sigmoid scores here.
        eval::PredictionMatrix pv = eval::predict_matrix(*model, val_view, signals, cfg.crop_len);
        const double val_auroc = eval::macro_auroc(pv, val_view.y).value;

        const auto epoch_end = std::chrono::steady_clock::now();
        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_count == 0 ? 0.0 : loss_sum / static_cast<double>(loss_count);
        log.val_macro_auroc = val_auroc;
        log.wall_ms = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(epoch_end - epoch_start).count());
        result.log.push_back(log);

        if (val_auroc > best_val) {  // first epoch achieving the max wins ties
            best_val = val_auroc;
            result.best = models::Checkpoint::from_model(*model);
            result.best.epoch = epoch;
            result.best.val_macro_auroc = val_auroc;
            result.best.adam_t = t;
            for (const auto& [name, slot] : opt_state) result.best.optimizer[name] = slot;
            result.selected_epoch = epoch;
        }
        if (cfg.early_stop_val_auroc > 0.0 && val_auroc >= cfg.early_stop_val_auroc) break;
    }
    result.best.label_set_digest = train_view.label_set.digest();
    return result;
}

}  // namespace ecgicd::train
