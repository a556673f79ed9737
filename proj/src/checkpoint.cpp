#include "mimir/checkpoint.hpp"

#include <cmath>
#include <limits>

#include "mimir/error.hpp"
#include "mimir/io.hpp"

namespace mimir {

void ModelCheckpoint::validate() const {
    const std::size_t t = registry.size();
    if (t == 0) throw ValidationError("checkpoint has no targets");
    if (norm.mean.size() != t || norm.std.size() != t) throw ValidationError("checkpoint norm stats do not match registry");
    if (calibration.factor.size() != t || calibration.n_points.size() != t || calibration.calibrated.size() != t) {
        throw ValidationError("checkpoint calibration does not match registry");
    }
    for (std::size_t i = 0; i < t; ++i) {
        if (!std::isfinite(norm.mean[i]) || !(norm.std[i] > 0.0) || !std::isfinite(norm.std[i])) {
            throw ValidationError("checkpoint norm stats for '" + registry[i].name + "' are invalid");
        }
        if (!(calibration.factor[i] > 0.0) || !std::isfinite(calibration.factor[i])) {
            throw ValidationError("checkpoint calibration factor for '" + registry[i].name + "' is invalid");
        }
    }
    if (network.n_targets != t) throw ValidationError("checkpoint network target count does not match registry");
    network.validate();
    Network(network).check_params(params);
    training.validate();
}

namespace {

std::uint32_t count32(std::size_t n) {
    if (n > std::numeric_limits<std::uint32_t>::max()) throw ValidationError("checkpoint field too large");
    return static_cast<std::uint32_t>(n);
}

}  // namespace

std::string encode_checkpoint(const ModelCheckpoint& c) {
    c.validate();
    ByteWriter w;
    w.raw("MCKP");
    w.u16(kCheckpointVersion);

    w.u32(count32(c.registry.size()));
    for (const auto& t : c.registry.targets()) {
        w.str(t.name);
        w.str(t.unit);
        w.u8(static_cast<std::uint8_t>(t.kind));
        w.str(t.group);
    }

    w.u32(count32(c.norm.size()));
    for (std::size_t i = 0; i < c.norm.size(); ++i) {
        w.f64(c.norm.mean[i]);
        w.f64(c.norm.std[i]);
    }

    w.str(c.calibration.source);
    w.u32(count32(c.calibration.size()));
    for (std::size_t i = 0; i < c.calibration.size(); ++i) {
        w.f64(c.calibration.factor[i]);
        w.u32(count32(c.calibration.n_points[i]));
        w.u8(c.calibration.calibrated[i]);
    }

    w.u32(count32(c.network.in_channels));
    w.u32(count32(c.network.in_height));
    w.u32(count32(c.network.in_width));
    w.u32(count32(c.network.blocks.size()));
    for (const auto& b : c.network.blocks) {
        w.u32(count32(b.out_channels));
        w.u8(b.pool ? 1 : 0);
    }
    w.u32(count32(c.network.n_targets));
    w.u64(c.network.init_seed);

    w.u32(count32(c.params.tensors.size()));
    for (const auto& t : c.params.tensors) {
        if (t.shape.size() > 255) throw ValidationError("tensor rank too large");
        w.u8(static_cast<std::uint8_t>(t.shape.size()));
        for (auto d : t.shape) w.u32(count32(d));
        for (double v : t.data) w.f32(static_cast<float>(v));
    }

    w.u32(count32(c.training.batch_size));
    w.u64(c.training.total_iterations);
    w.u64(c.training.stage1_iterations);
    w.f64(c.training.lr_stage1);
    w.f64(c.training.lr_stage2);
    w.f64(c.training.beta1);
    w.f64(c.training.beta2);
    w.f64(c.training.epsilon);
    w.u8(c.training.augment ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(c.training.augment_shift));
    w.u64(c.training.seed);

    w.u32(count32(c.metadata.size()));
    for (const auto& [k, v] : c.metadata) {
        w.str(k);
        w.str(v);
    }
    return w.take();
}

ModelCheckpoint decode_checkpoint(std::string_view bytes, const std::string& what) {
    ByteReader r(bytes, what);
    if (r.raw(4) != "MCKP") r.fail("bad magic, expected MCKP");
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
        r.fail("unsupported checkpoint version " + std::to_string(version) + " (expected " +
               std::to_string(kCheckpointVersion) + ")");
    }
    ModelCheckpoint c;

    const std::uint32_t n_targets = r.u32();
    r.expect_available(n_targets, 13);
    for (std::uint32_t i = 0; i < n_targets; ++i) {
        TargetSpec t;
        t.name = r.str();
        t.unit = r.str();
        const std::uint8_t kind = r.u8();
        if (kind > 1) r.fail("unknown target kind " + std::to_string(kind));
        t.kind = static_cast<TargetKind>(kind);
        t.group = r.str();
        try {
            c.registry.add(std::move(t));
        } catch (const ValidationError& e) {
            r.fail(e.what());
        }
    }

    const std::uint32_t n_norm = r.u32();
    r.expect_available(n_norm, 16);
    for (std::uint32_t i = 0; i < n_norm; ++i) {
        c.norm.mean.push_back(r.f64());
        c.norm.std.push_back(r.f64());
    }

    c.calibration.source = r.str();
    const std::uint32_t n_cal = r.u32();
    r.expect_available(n_cal, 13);
    for (std::uint32_t i = 0; i < n_cal; ++i) {
        c.calibration.factor.push_back(r.f64());
        c.calibration.n_points.push_back(r.u32());
        const std::uint8_t flag = r.u8();
        if (flag > 1) r.fail("calibration flag must be 0 or 1");
        c.calibration.calibrated.push_back(flag);
    }

    c.network.in_channels = r.u32();
    c.network.in_height = r.u32();
    c.network.in_width = r.u32();
    const std::uint32_t n_blocks = r.u32();
    r.expect_available(n_blocks, 5);
    c.network.blocks.clear();
    for (std::uint32_t i = 0; i < n_blocks; ++i) {
        ConvBlock b;
        b.out_channels = r.u32();
        const std::uint8_t pool = r.u8();
        if (pool > 1) r.fail("pool flag must be 0 or 1");
        b.pool = pool == 1;
        c.network.blocks.push_back(b);
    }
    c.network.n_targets = r.u32();
    c.network.init_seed = r.u64();

    const std::uint32_t n_tensors = r.u32();
    r.expect_available(n_tensors, 1);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        Tensor t;
        const std::uint8_t rank = r.u8();
        r.expect_available(rank, 4);
        std::uint64_t count = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            const std::uint32_t dim = r.u32();
            t.shape.push_back(dim);
            count *= dim;
            r.expect_available(count, 4);
        }
        t.data.resize(count);
        for (double& v : t.data) v = r.f32();
        c.params.tensors.push_back(std::move(t));
    }

    c.training.batch_size = r.u32();
    c.training.total_iterations = r.u64();
    c.training.stage1_iterations = r.u64();
    c.training.lr_stage1 = r.f64();
    c.training.lr_stage2 = r.f64();
    c.training.beta1 = r.f64();
    c.training.beta2 = r.f64();
    c.training.epsilon = r.f64();
    const std::uint8_t augment = r.u8();
    if (augment > 1) r.fail("augment flag must be 0 or 1");
    c.training.augment = augment == 1;
    c.training.augment_shift = static_cast<int>(r.u32());
    c.training.seed = r.u64();

    const std::uint32_t n_meta = r.u32();
    r.expect_available(n_meta, 8);
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        std::string k = r.str();
        std::string v = r.str();
        c.metadata.emplace_back(std::move(k), std::move(v));
    }
    r.expect_end();
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw FormatError(what + ": " + e.what());
    }
    return c;
}

void save_checkpoint(const std::string& path, const ModelCheckpoint& checkpoint) {
    write_binary_file(path, encode_checkpoint(checkpoint));
}

ModelCheckpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_binary_file(path), path); }

}  // namespace mimir
