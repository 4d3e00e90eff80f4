#ifndef ECGICD_TRAINER_HPP
#define ECGICD_TRAINER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ecgicd/checkpoint.hpp"
#include "ecgicd/dataset.hpp"
#include "ecgicd/models.hpp"
#include "ecgicd/rng.hpp"
#include "ecgicd/signal.hpp"

namespace ecgicd::train {

struct RecordTooShort : std::runtime_error {
    RecordTooShort() : std::runtime_error("record shorter than crop length") {}
};
struct Diverged : std::runtime_error {
    Diverged() : std::runtime_error("training diverged (non-finite loss)") {}
};
struct NonFiniteUpdate : std::runtime_error {
    NonFiniteUpdate() : std::runtime_error("non-finite optimizer update") {}
};

/// Training protocol constants; the published run uses lr 1e-3, weight
/// decay 1e-3, constant schedule, 2.5 s crops.
struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint32_t epochs = 20;
    std::uint32_t batch_size = 32;
    std::size_t crop_len = 250;
    std::uint64_t seed = 0;
    /// Optional: stop once validation macro AUROC reaches this value
    /// (0 disables). Evaluated deterministically, so re-runs stop at the
    /// same epoch.
    double early_stop_val_auroc = 0.0;
};

/// Preprocessed waveforms addressed by RecordEntry::signal_index.
using SignalStore = std::vector<signal::Ecg>;

/// Contiguous window with uniform random start; all leads share it.
models::Act<float> sample_crop(const signal::Ecg& record, std::size_t crop_len, DetRng& rng);

/// One decoupled-weight-decay Adam step on a single tensor:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * (mhat / (sqrt(vhat) + eps) + wd * theta)
/// with bias-corrected mhat, vhat. t counts steps from 1.
void adamw_step(std::vector<float>& theta, const std::vector<float>& grad,
                models::AdamSlot& slot, std::uint64_t t, const TrainConfig& cfg);

struct EpochLog {
    std::uint32_t epoch = 0;
    double train_loss = 0.0;
    double val_macro_auroc = 0.0;
    std::uint64_t wall_ms = 0;
};

struct TrainResult {
    models::Checkpoint best;
    std::vector<EpochLog> log;
    std::uint32_t selected_epoch = 0;
};

/// One JSON object per epoch: {"epoch":..,"train_loss":..,
/// "val_macro_auroc":..,"wall_ms":..}.
void save_train_log(const std::string& path, const std::vector<EpochLog>& log);

/// Run the training protocol on a scenario-filtered train view and an
/// eval_view'd validation view. Model selection keeps the first epoch
/// with the maximum validation macro AUROC (validation scored with the
/// same crop averaging as the test protocol). Single-threaded and
/// bit-deterministic for a fixed seed.
TrainResult train(const models::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const data::LabeledDataset& train_view, const data::LabeledDataset& val_view,
                  const SignalStore& signals);

}  // namespace ecgicd::train

#endif
