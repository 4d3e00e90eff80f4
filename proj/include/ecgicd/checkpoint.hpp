#ifndef ECGICD_CHECKPOINT_HPP
#define ECGICD_CHECKPOINT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecgicd/models.hpp"

namespace ecgicd::models {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Optimizer state for one parameter tensor.
struct AdamSlot {
    std::vector<float> m;
    std::vector<float> v;
};

/// Serializable training snapshot. Tensor payloads are raw
/// little-endian f32; the container is
///   magic "ECKP" | version u32 | config json (u64 len + bytes) |
///   epoch u32 | val_macro_auroc f64 | adam_t u64 | label_set_digest |
///   n_tensors u32 | tensors (name, dtype u8, ndim u32, dims u64[], data) |
///   crc32 u32 over everything after the magic.
struct Checkpoint {
    ModelConfig config;
    std::uint32_t epoch = 0;
    double val_macro_auroc = 0.0;
    std::uint64_t adam_t = 0;
    std::string label_set_digest;
    std::map<std::string, std::vector<float>> tensors;       // parameters + buffers
    std::map<std::string, AdamSlot> optimizer;               // keyed by parameter name

    static Checkpoint from_model(Model<float>& model);
    void apply_to(Model<float>& model) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace ecgicd::models

#endif
