#ifndef ECGICD_SCORING_HPP
#define ECGICD_SCORING_HPP

#include <cstdint>
#include <vector>

#include "ecgicd/dataset.hpp"
#include "ecgicd/eval.hpp"
#include "ecgicd/models.hpp"
#include "ecgicd/signal.hpp"

namespace ecgicd::eval {

struct ScoreStats {
    std::uint64_t bad_length_records = 0;  // not an exact multiple of 4 crops
};

/// Mean post-sigmoid prediction over the non-overlapping crops covering
/// the record (four for a 1000-step record at crop 250). Records whose
/// length is not 4*crop_len fall back to floor(len/crop_len) crops and
/// are counted in stats.
std::vector<double> crop_average(models::Model<float>& model, const signal::Ecg& record,
                                 std::size_t crop_len = 250, ScoreStats* stats = nullptr);

/// Crop-averaged scores for every record of a dataset view.
PredictionMatrix predict_matrix(models::Model<float>& model, const data::LabeledDataset& view,
                                const std::vector<signal::Ecg>& signals, std::size_t crop_len = 250,
                                ScoreStats* stats = nullptr);

}  // namespace ecgicd::eval

#endif
