#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mimir/dataset.hpp"
#include "mimir/model.hpp"
#include "mimir/training.hpp"
#include "mimir/uncertainty.hpp"

namespace mimir {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// A trained system: everything needed to turn a tile into calibrated predictions.
///
/// Byte layout (little-endian): "MCKP", u16 version, registry, norm stats (f64), calibration,
/// network config, parameter tensors (u8 rank, u32 dims, f32 values), training config, metadata.
/// Strings are u32 length plus bytes; every list is prefixed with a u32 count.
struct ModelCheckpoint {
    TargetRegistry registry;
    NormStats norm;
    CalibrationFactors calibration;
    NetworkConfig network;
    ParameterSet params;
    TrainingConfig training;
    std::vector<std::pair<std::string, std::string>> metadata;

    /// Shapes and counts agree with each other.
    void validate() const;
};

/// Parameters are stored as f32, so decode(encode(c)) equals c only when c.params are
/// already f32-representable (see ParameterSet::quantized_f32).
std::string encode_checkpoint(const ModelCheckpoint& checkpoint);
ModelCheckpoint decode_checkpoint(std::string_view bytes, const std::string& what = "checkpoint");

void save_checkpoint(const std::string& path, const ModelCheckpoint& checkpoint);
ModelCheckpoint load_checkpoint(const std::string& path);

}  // namespace mimir
