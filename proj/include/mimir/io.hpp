#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mimir/dataset.hpp"
#include "mimir/projection.hpp"
#include "mimir/volume.hpp"

namespace mimir {

/// Little-endian binary encoding shared by the file formats.
class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void raw(std::string_view s);
    void str(std::string_view s);  // u32 length, then bytes

    const std::string& bytes() const { return bytes_; }
    std::string take() { return std::move(bytes_); }

private:
    std::string bytes_;
};

/// Reads what ByteWriter wrote; every read is bounds-checked and throws FormatError.
class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::string_view raw(std::size_t n);
    std::string str();

    /// Throws unless the remaining byte count is at least n * elem (guards length fields).
    void expect_available(std::uint64_t n, std::size_t elem);
    std::size_t remaining() const { return bytes_.size() - pos_; }
    void expect_end() const;
    [[noreturn]] void fail(const std::string& msg) const;

private:
    const unsigned char* take(std::size_t n);

    std::string_view bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::string read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, std::string_view bytes);

inline constexpr std::uint16_t kVolumeVersion = 1;
inline constexpr std::uint16_t kTileVersion = 1;

std::string encode_volume(const VolumeGrid& volume);
VolumeGrid decode_volume(std::string_view bytes, const std::string& what = "volume");
void save_volume(const std::string& path, const VolumeGrid& volume);
VolumeGrid load_volume(const std::string& path);

std::string encode_tile(const ProjectionTile& tile);
ProjectionTile decode_tile(std::string_view bytes, const std::string& what = "tile");
void save_tile(const std::string& path, const ProjectionTile& tile);
ProjectionTile load_tile(const std::string& path);

/// One channel as binary 8-bit PGM, values in [0, 1] scaled to 0..255.
std::string tile_channel_pgm(const ProjectionTile& tile, std::size_t channel);

/// subject_id, then `<name>` and `<name>_mask` per target. Masked values are written empty.
std::string labels_csv(const LabelMatrix& labels);
LabelMatrix parse_labels_csv(std::string_view text);

/// subject_id,fold
std::string folds_csv(const FoldAssignment& folds, std::span<const std::string> subjects);
/// Fold ids in the order of `subjects`; every subject must appear exactly once.
FoldAssignment parse_folds_csv(std::string_view text, std::span<const std::string> subjects);

struct PredictionTable {
    std::vector<std::string> targets;
    std::vector<std::string> subjects;
    std::vector<long long> fold;  // -1 when not from cross-validation
    std::vector<double> mean;     // subjects x targets
    std::vector<double> sigma;
    std::vector<double> low;
    std::vector<double> high;

    std::size_t n_subjects() const { return subjects.size(); }
    std::size_t n_targets() const { return targets.size(); }
    std::size_t index(std::size_t i, std::size_t t) const { return i * targets.size() + t; }

    /// subject_id,fold, then per target `<name>_mean,<name>_sigma,<name>_low,<name>_high`.
    std::string to_csv() const;
    static PredictionTable parse_csv(std::string_view text);
};

}  // namespace mimir
