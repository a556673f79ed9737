#include "mimir/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "mimir/error.hpp"
#include "mimir/text.hpp"

namespace mimir {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

void ByteWriter::u16(std::uint16_t v) { raw({reinterpret_cast<const char*>(&v), sizeof v}); }
void ByteWriter::u32(std::uint32_t v) { raw({reinterpret_cast<const char*>(&v), sizeof v}); }
void ByteWriter::u64(std::uint64_t v) { raw({reinterpret_cast<const char*>(&v), sizeof v}); }
void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
void ByteWriter::raw(std::string_view s) { bytes_.append(s); }
void ByteWriter::str(std::string_view s) {
    if (s.size() > std::numeric_limits<std::uint32_t>::max()) throw ValidationError("string too long to encode");
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
}

void ByteReader::fail(const std::string& msg) const {
    throw FormatError(what_ + ": " + msg + " at byte " + std::to_string(pos_));
}

const unsigned char* ByteReader::take(std::size_t n) {
    if (n > remaining()) fail("unexpected end of data");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += n;
    return p;
}

std::uint8_t ByteReader::u8() { return *take(1); }
std::uint16_t ByteReader::u16() {
    std::uint16_t v;
    std::memcpy(&v, take(2), 2);
    return v;
}
std::uint32_t ByteReader::u32() {
    std::uint32_t v;
    std::memcpy(&v, take(4), 4);
    return v;
}
std::uint64_t ByteReader::u64() {
    std::uint64_t v;
    std::memcpy(&v, take(8), 8);
    return v;
}
float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }
std::string_view ByteReader::raw(std::size_t n) {
    const auto* p = take(n);
    return {reinterpret_cast<const char*>(p), n};
}
std::string ByteReader::str() {
    const std::uint32_t n = u32();
    if (n > remaining()) fail("string length " + std::to_string(n) + " exceeds remaining data");
    return std::string(raw(n));
}
void ByteReader::expect_available(std::uint64_t n, std::size_t elem) {
    if (elem != 0 && n > remaining() / elem) fail("length field " + std::to_string(n) + " exceeds remaining data");
}
void ByteReader::expect_end() const {
    if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes");
}

std::string read_binary_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path + "'");
    return buf.str();
}

void write_binary_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error writing '" + path + "'");
}

namespace {

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw ValidationError(std::string(what) + " too large");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string encode_volume(const VolumeGrid& v) {
    if (v.channels > 255) throw ValidationError("volume has too many channels");
    if (v.voxels.size() != v.channels * v.depth * v.height * v.width) throw ValidationError("volume voxel count mismatch");
    ByteWriter w;
    w.raw("MVOL");
    w.u16(kVolumeVersion);
    w.u32(checked_u32(v.depth, "depth"));
    w.u32(checked_u32(v.height, "height"));
    w.u32(checked_u32(v.width, "width"));
    w.u8(static_cast<std::uint8_t>(v.channels));
    w.f32(v.voxel_size);
    for (float x : v.voxels) w.f32(x);
    return w.take();
}

VolumeGrid decode_volume(std::string_view bytes, const std::string& what) {
    ByteReader r(bytes, what);
    if (r.raw(4) != "MVOL") r.fail("bad magic, expected MVOL");
    const std::uint16_t version = r.u16();
    if (version != kVolumeVersion) r.fail("unsupported volume version " + std::to_string(version));
    const std::uint64_t d = r.u32();
    const std::uint64_t h = r.u32();
    const std::uint64_t wd = r.u32();
    const std::uint64_t c = r.u8();
    const float vs = r.f32();
    const std::uint64_t count = c * d * h * wd;
    if (d != 0 && h != 0 && wd != 0 && c != 0 && count / c / d / h != wd) r.fail("dimension overflow");
    r.expect_available(count, 4);
    VolumeGrid v(d, h, wd, c, vs);
    for (float& x : v.voxels) x = r.f32();
    r.expect_end();
    return v;
}

void save_volume(const std::string& path, const VolumeGrid& volume) { write_binary_file(path, encode_volume(volume)); }
VolumeGrid load_volume(const std::string& path) { return decode_volume(read_binary_file(path), path); }

std::string encode_tile(const ProjectionTile& t) {
    if (t.pixels.size() != t.channels * t.height * t.width) throw ValidationError("tile pixel count mismatch");
    ByteWriter w;
    w.raw("MTIL");
    w.u16(kTileVersion);
    w.u32(checked_u32(t.channels, "channels"));
    w.u32(checked_u32(t.height, "height"));
    w.u32(checked_u32(t.width, "width"));
    for (float x : t.pixels) w.f32(x);
    return w.take();
}

ProjectionTile decode_tile(std::string_view bytes, const std::string& what) {
    ByteReader r(bytes, what);
    if (r.raw(4) != "MTIL") r.fail("bad magic, expected MTIL");
    const std::uint16_t version = r.u16();
    if (version != kTileVersion) r.fail("unsupported tile version " + std::to_string(version));
    const std::uint64_t c = r.u32();
    const std::uint64_t h = r.u32();
    const std::uint64_t w = r.u32();
    if (c != 0 && h != 0 && (c * h) / c != h) r.fail("dimension overflow");
    if (c * h != 0 && (c * h * w) / (c * h) != w) r.fail("dimension overflow");
    r.expect_available(c * h * w, 4);
    ProjectionTile t(c, h, w);
    for (float& x : t.pixels) x = r.f32();
    r.expect_end();
    return t;
}

void save_tile(const std::string& path, const ProjectionTile& tile) { write_binary_file(path, encode_tile(tile)); }
ProjectionTile load_tile(const std::string& path) { return decode_tile(read_binary_file(path), path); }

std::string tile_channel_pgm(const ProjectionTile& tile, std::size_t channel) {
    if (channel >= tile.channels) throw ValidationError("tile channel " + std::to_string(channel) + " out of range");
    std::string out = "P5\n" + std::to_string(tile.width) + " " + std::to_string(tile.height) + "\n255\n";
    for (std::size_t y = 0; y < tile.height; ++y) {
        for (std::size_t x = 0; x < tile.width; ++x) {
            const double v = std::clamp(static_cast<double>(tile.at(channel, y, x)), 0.0, 1.0);
            out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
    }
    return out;
}

std::string labels_csv(const LabelMatrix& labels) {
    std::ostringstream out;
    out << "subject_id";
    for (const auto& t : labels.targets) out << ',' << t << ',' << t << "_mask";
    out << '\n';
    for (std::size_t i = 0; i < labels.n_subjects(); ++i) {
        out << labels.subjects[i];
        for (std::size_t t = 0; t < labels.n_targets(); ++t) {
            out << ',';
            if (labels.known(i, t)) out << format_double(labels.value(i, t));
            out << ',' << (labels.known(i, t) ? 1 : 0);
        }
        out << '\n';
    }
    return out.str();
}

LabelMatrix parse_labels_csv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw FormatError("labels CSV is empty");
    const auto header = split(lines[0], ',');
    if (header.empty() || trim(header[0]) != "subject_id" || header.size() % 2 != 1) {
        throw FormatError("labels CSV header must be subject_id followed by <name>,<name>_mask pairs");
    }
    std::vector<std::string> targets;
    for (std::size_t c = 1; c < header.size(); c += 2) {
        const std::string name = trim(header[c]);
        if (trim(header[c + 1]) != name + "_mask") {
            throw FormatError("labels CSV column '" + trim(header[c + 1]) + "' should be '" + name + "_mask'");
        }
        targets.push_back(name);
    }
    std::vector<std::string> subjects;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        if (trim(lines[l]).empty()) continue;
        auto cells = split(lines[l], ',');
        if (cells.size() != header.size()) {
            throw FormatError("labels CSV line " + std::to_string(l + 1) + " has " + std::to_string(cells.size()) +
                              " fields, expected " + std::to_string(header.size()));
        }
        subjects.push_back(trim(cells[0]));
        rows.push_back(std::move(cells));
    }
    LabelMatrix labels(std::move(subjects), std::move(targets));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t t = 0; t < labels.n_targets(); ++t) {
            const std::string mask = trim(rows[i][2 + 2 * t]);
            if (mask != "0" && mask != "1") {
                throw FormatError("labels CSV row " + std::to_string(i + 2) + ": mask must be 0 or 1");
            }
            const bool on = mask == "1";
            labels.set_mask(i, t, on);
            try {
                labels.value(i, t) = parse_double(rows[i][1 + 2 * t]);
            } catch (const std::exception& e) {
                throw FormatError("labels CSV row " + std::to_string(i + 2) + ": " + e.what());
            }
            if (!on) labels.value(i, t) = std::numeric_limits<double>::quiet_NaN();
        }
    }
    try {
        labels.validate();
    } catch (const ValidationError& e) {
        throw FormatError(std::string("labels CSV: ") + e.what());
    }
    return labels;
}

std::string folds_csv(const FoldAssignment& folds, std::span<const std::string> subjects) {
    if (subjects.size() != folds.fold.size()) throw ValidationError("folds_csv: subject count mismatch");
    std::ostringstream out;
    out << "subject_id,fold\n";
    for (std::size_t i = 0; i < subjects.size(); ++i) out << subjects[i] << ',' << folds.fold[i] << '\n';
    return out.str();
}

FoldAssignment parse_folds_csv(std::string_view text, std::span<const std::string> subjects) {
    const auto lines = split_lines(text);
    if (lines.empty() || trim(lines[0]) != "subject_id,fold") throw FormatError("folds CSV header must be subject_id,fold");
    std::map<std::string, long long> by_id;
    long long max_fold = -1;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        if (trim(lines[l]).empty()) continue;
        const auto cells = split(lines[l], ',');
        if (cells.size() != 2) throw FormatError("folds CSV line " + std::to_string(l + 1) + " needs 2 fields");
        long long f = 0;
        try {
            f = parse_int(cells[1]);
        } catch (const std::exception& e) {
            throw FormatError("folds CSV line " + std::to_string(l + 1) + ": " + e.what());
        }
        if (f < 0) throw FormatError("folds CSV line " + std::to_string(l + 1) + ": negative fold");
        if (!by_id.emplace(trim(cells[0]), f).second) throw FormatError("folds CSV repeats subject '" + trim(cells[0]) + "'");
        max_fold = std::max(max_fold, f);
    }
    FoldAssignment folds;
    folds.k = static_cast<std::size_t>(max_fold + 1);
    for (const auto& s : subjects) {
        const auto it = by_id.find(s);
        if (it == by_id.end()) throw FormatError("folds CSV lacks subject '" + s + "'");
        folds.fold.push_back(static_cast<std::size_t>(it->second));
    }
    return folds;
}

std::string PredictionTable::to_csv() const {
    std::ostringstream out;
    out << "subject_id,fold";
    for (const auto& t : targets) out << ',' << t << "_mean," << t << "_sigma," << t << "_low," << t << "_high";
    out << '\n';
    for (std::size_t i = 0; i < n_subjects(); ++i) {
        out << subjects[i] << ',' << fold[i];
        for (std::size_t t = 0; t < n_targets(); ++t) {
            const auto j = index(i, t);
            out << ',' << format_double(mean[j]) << ',' << format_double(sigma[j]) << ',' << format_double(low[j])
                << ',' << format_double(high[j]);
        }
        out << '\n';
    }
    return out.str();
}

PredictionTable PredictionTable::parse_csv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw FormatError("predictions CSV is empty");
    const auto header = split(lines[0], ',');
    if (header.size() < 2 || trim(header[0]) != "subject_id" || trim(header[1]) != "fold" || (header.size() - 2) % 4 != 0) {
        throw FormatError("predictions CSV header must be subject_id,fold then four columns per target");
    }
    PredictionTable p;
    static constexpr const char* kSuffix[4] = {"_mean", "_sigma", "_low", "_high"};
    for (std::size_t c = 2; c < header.size(); c += 4) {
        std::string name = trim(header[c]);
        if (name.size() <= 5 || !name.ends_with("_mean")) throw FormatError("predictions CSV column '" + name + "' should end in _mean");
        name.resize(name.size() - 5);
        for (int k = 1; k < 4; ++k) {
            if (trim(header[c + k]) != name + kSuffix[k]) {
                throw FormatError("predictions CSV column '" + trim(header[c + k]) + "' should be '" + name + kSuffix[k] + "'");
            }
        }
        p.targets.push_back(name);
    }
    for (std::size_t l = 1; l < lines.size(); ++l) {
        if (trim(lines[l]).empty()) continue;
        const auto cells = split(lines[l], ',');
        if (cells.size() != header.size()) throw FormatError("predictions CSV line " + std::to_string(l + 1) + " has a wrong field count");
        try {
            p.subjects.push_back(trim(cells[0]));
            p.fold.push_back(parse_int(cells[1]));
            for (std::size_t t = 0; t < p.targets.size(); ++t) {
                p.mean.push_back(parse_double(cells[2 + 4 * t]));
                p.sigma.push_back(parse_double(cells[3 + 4 * t]));
                p.low.push_back(parse_double(cells[4 + 4 * t]));
                p.high.push_back(parse_double(cells[5 + 4 * t]));
            }
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception& e) {
            throw FormatError("predictions CSV line " + std::to_string(l + 1) + ": " + e.what());
        }
    }
    return p;
}

}  // namespace mimir
