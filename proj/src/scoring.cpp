#include "ecgicd/scoring.hpp"

namespace ecgicd::eval {

std::vector<double> crop_average(models::Model<float>& model, const signal::Ecg& record,
                                 std::size_t crop_len, ScoreStats* stats) {
    const std::size_t len = record.n_samples();
    if (len < crop_len) throw EvalError("record shorter than one crop");
    const std::size_t n_crops = len / crop_len;
    if (len != 4 * crop_len && stats != nullptr) ++stats->bad_length_records;

    const std::size_t leads = record.n_leads();
    models::Act<float> batch(n_crops, leads, crop_len);
    for (std::size_t c = 0; c < n_crops; ++c)
        for (std::size_t l = 0; l < leads; ++l) {
            const float* src = record.samples[l].data() + c * crop_len;
            std::copy(src, src + crop_len, batch.row(c, l));
        }
    models::Mat<float> logits;
    model.forward(batch, logits, /*train=*/false);
    std::vector<double> scores(logits.f, 0.0);
    for (std::size_t c = 0; c < n_crops; ++c)
        for (std::size_t j = 0; j < logits.f; ++j)
            scores[j] += static_cast<double>(models::sigmoid(logits.at(c, j)));
    for (auto& s : scores) s /= static_cast<double>(n_crops);
    return scores;
}

PredictionMatrix predict_matrix(models::Model<float>& model, const data::LabeledDataset& view,
                                const std::vector<signal::Ecg>& signals, std::size_t crop_len,
                                ScoreStats* stats) {
    PredictionMatrix p;
    p.label_set = view.label_set;
    p.n = view.records.size();
    p.m = view.label_set.size();
    p.scores.assign(p.n * p.m, 0.0);
    p.record_ids.reserve(p.n);
    for (std::size_t i = 0; i < view.records.size(); ++i) {
        const auto& rec = view.records[i];
        p.record_ids.push_back(rec.record_id);
        const auto scores = crop_average(model, signals.at(rec.signal_index), crop_len, stats);
        if (scores.size() != p.m) throw EvalError("model output width does not match label set");
        std::copy(scores.begin(), scores.end(), p.scores.begin() + static_cast<std::ptrdiff_t>(i * p.m));
    }
    return p;
}

}  // namespace ecgicd::eval
