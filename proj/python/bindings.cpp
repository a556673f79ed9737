#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mimir/checkpoint.hpp"
#include "mimir/config.hpp"
#include "mimir/engine.hpp"
#include "mimir/error.hpp"
#include "mimir/io.hpp"
#include "mimir/metrics.hpp"
#include "mimir/phantom.hpp"
#include "mimir/projection.hpp"
#include "mimir/training.hpp"
#include "mimir/uncertainty.hpp"

namespace py = pybind11;
using namespace mimir;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

F32Array volume_to_array(const VolumeGrid& v) {
    F32Array out({v.channels, v.depth, v.height, v.width});
    std::copy(v.voxels.begin(), v.voxels.end(), out.mutable_data());
    return out;
}

VolumeGrid array_to_volume(const F32Array& a, float voxel_size) {
    if (a.ndim() != 4) throw ValidationError("volume array must be 4-D (channels, D, H, W)");
    VolumeGrid v(a.shape(1), a.shape(2), a.shape(3), a.shape(0), voxel_size);
    std::copy(a.data(), a.data() + a.size(), v.voxels.begin());
    return v;
}

F32Array tile_to_array(const ProjectionTile& t) {
    F32Array out({t.channels, t.height, t.width});
    std::copy(t.pixels.begin(), t.pixels.end(), out.mutable_data());
    return out;
}

ProjectionTile array_to_tile(const float* data, std::size_t c, std::size_t h, std::size_t w) {
    ProjectionTile t(c, h, w);
    std::copy(data, data + t.pixels.size(), t.pixels.begin());
    return t;
}

std::vector<double> to_vector(const F64Array& a) { return {a.data(), a.data() + a.size()}; }

F64Array matrix(const std::vector<double>& values, std::size_t rows, std::size_t cols) {
    F64Array out({rows, cols});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

py::dict prediction_dict(const PredictionTable& p) {
    py::dict d;
    d["subjects"] = p.subjects;
    d["targets"] = p.targets;
    d["mean"] = matrix(p.mean, p.n_subjects(), p.n_targets());
    d["sigma"] = matrix(p.sigma, p.n_subjects(), p.n_targets());
    d["low"] = matrix(p.low, p.n_subjects(), p.n_targets());
    d["high"] = matrix(p.high, p.n_subjects(), p.n_targets());
    return d;
}

class Model {
public:
    explicit Model(ModelCheckpoint ck) : ck_(std::move(ck)) {}

    static Model load(const std::string& path) { return Model(load_checkpoint(path)); }
    static Model from_bytes(const py::bytes& b) { return Model(decode_checkpoint(std::string(b))); }

    void save(const std::string& path) const { save_checkpoint(path, ck_); }
    py::bytes to_bytes() const { return py::bytes(encode_checkpoint(ck_)); }

    std::vector<std::string> targets() const { return ck_.registry.names(); }
    py::tuple input_shape() const {
        return py::make_tuple(ck_.network.in_channels, ck_.network.in_height, ck_.network.in_width);
    }
    std::vector<double> calibration() const { return ck_.calibration.factor; }
    std::vector<std::pair<std::string, std::string>> metadata() const { return ck_.metadata; }

    py::dict predict(const F32Array& tiles, std::vector<std::string> ids, double level) const {
        if (tiles.ndim() != 4) throw ValidationError("tiles must be 4-D (n, channels, height, width)");
        const std::size_t n = tiles.shape(0);
        const std::size_t c = tiles.shape(1), h = tiles.shape(2), w = tiles.shape(3);
        if (ids.empty()) {
            for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
        }
        if (ids.size() != n) throw ValidationError("need one id per tile");
        std::vector<ProjectionTile> ts;
        ts.reserve(n);
        for (std::size_t i = 0; i < n; ++i) ts.push_back(array_to_tile(tiles.data() + i * c * h * w, c, h, w));
        PredictionTable p;
        {
            py::gil_scoped_release release;
            p = mimir::predict(ck_, ts, ids, level);
        }
        return prediction_dict(p);
    }

    py::dict predict_volumes(const std::vector<std::string>& paths, double level) const {
        std::vector<ProjectionTile> ts;
        std::vector<std::string> ids;
        for (const auto& path : paths) {
            ts.push_back(prepare_tile(load_volume(path), ck_.network));
            std::string id = path.substr(path.find_last_of('/') + 1);
            if (const auto dot = id.rfind('.'); dot != std::string::npos) id.erase(dot);
            ids.push_back(id);
        }
        return prediction_dict(mimir::predict(ck_, ts, ids, level));
    }

private:
    ModelCheckpoint ck_;
};

EngineConfig config_from(const std::string& text) {
    EngineConfig c = parse_config(text);
    c.validate();
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Phenotype regression from two-channel body volumes";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("phantom_subject",
          [](std::size_t index, std::uint64_t seed, std::size_t depth, std::size_t height, std::size_t width,
             double noise_sigma) {
              PhantomSpec spec;
              spec.seed = seed;
              spec.depth = depth;
              spec.height = height;
              spec.width = width;
              spec.noise_sigma = noise_sigma;
              spec.n_subjects = index + 1;
              spec.validate();
              const PhantomSubject s = generate_subject(spec, index);
              return py::make_tuple(s.subject_id, volume_to_array(s.volume), s.truth);
          },
          py::arg("index"), py::arg("seed") = 1, py::arg("depth") = 64, py::arg("height") = 64, py::arg("width") = 32,
          py::arg("noise_sigma") = 0.02, "(subject_id, volume[C, D, H, W], truth dict) for one phantom subject");
    m.def("phantom_targets", [] {
        std::vector<py::tuple> out;
        const TargetRegistry registry = phantom_registry();
        for (const auto& t : registry.targets())
            out.push_back(py::make_tuple(t.name, t.unit, std::string(to_string(t.kind)), t.group));
        return out;
    });

    m.def("project", [](const F32Array& volume) { return tile_to_array(mimir::project(array_to_volume(volume, 1.0f))); },
          py::arg("volume"), "Normalized (H+W) x D projection tile of a (C, D, H, W) volume");
    m.def("resize_tile",
          [](const F32Array& tile, std::size_t height, std::size_t width) {
              if (tile.ndim() != 3) throw ValidationError("tile must be 3-D (channels, height, width)");
              const ProjectionTile t = array_to_tile(tile.data(), tile.shape(0), tile.shape(1), tile.shape(2));
              return tile_to_array(mimir::resize_tile(t, height, width));
          },
          py::arg("tile"), py::arg("height"), py::arg("width"));
    m.def("load_volume",
          [](const std::string& path) {
              const VolumeGrid v = mimir::load_volume(path);
              return py::make_tuple(volume_to_array(v), v.voxel_size);
          },
          py::arg("path"));
    m.def("save_volume",
          [](const std::string& path, const F32Array& volume, float voxel_size) {
              mimir::save_volume(path, array_to_volume(volume, voxel_size));
          },
          py::arg("path"), py::arg("volume"), py::arg("voxel_size") = 4.0f);

    m.def("icc_2_1", [](const F64Array& x, const F64Array& y) { return icc_2_1(to_vector(x), to_vector(y)).value; },
          py::arg("x"), py::arg("y"));
    m.def("r_squared", [](const F64Array& t, const F64Array& p) { return r_squared(to_vector(t), to_vector(p)); },
          py::arg("truth"), py::arg("pred"));
    m.def("mae_mape",
          [](const F64Array& t, const F64Array& p) {
              const ErrorSummary e = mae_mape(to_vector(t), to_vector(p));
              return py::make_tuple(e.mae, e.mape);
          },
          py::arg("truth"), py::arg("pred"));
    m.def("auc_roc", [](const F64Array& l, const F64Array& s) { return auc_roc(to_vector(l), to_vector(s)); },
          py::arg("labels"), py::arg("scores"));
    m.def("normal_quantile", &normal_quantile, py::arg("level"));
    m.def("confidence_interval",
          [](double mu, double sigma, double level) {
              const Interval i = confidence_interval(mu, sigma, level);
              return py::make_tuple(i.low, i.high);
          },
          py::arg("mu"), py::arg("sigma"), py::arg("level") = 0.95);
    m.def("nll_loss",
          [](const F64Array& mu, const F64Array& log_var, const F64Array& y,
             const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask) {
              if (mu.ndim() != 2) throw ValidationError("mu must be 2-D (n, targets)");
              const std::vector<std::uint8_t> mk(mask.data(), mask.data() + mask.size());
              const LossResult r = nll_loss(to_vector(mu), to_vector(log_var), to_vector(y), mk);
              const std::size_t n = mu.shape(0), t = mu.shape(1);
              return py::make_tuple(r.loss, matrix(r.grad_mu, n, t), matrix(r.grad_log_var, n, t));
          },
          py::arg("mu"), py::arg("log_var"), py::arg("y"), py::arg("mask"),
          "(loss, d loss/d mu, d loss/d log_var) of the masked Gaussian NLL");

    m.def("default_config", [] { return EngineConfig{}.to_text(); });
    m.def("write_phantom_dataset",
          [](const std::string& dir, const std::string& config) {
              const EngineConfig c = config_from(config);
              py::gil_scoped_release release;
              mimir::write_phantom_dataset(dir, c);
          },
          py::arg("dir"), py::arg("config") = "");
    m.def("train",
          [](const std::string& data_dir, const std::string& config) {
              const EngineConfig c = config_from(config);
              py::gil_scoped_release release;
              const Dataset data = load_dataset(data_dir, c.network).filtered(c.groups);
              NetworkConfig net = c.network;
              net.n_targets = data.registry.size();
              const FoldAssignment all{1, std::vector<std::size_t>(data.labels.n_subjects(), 0)};
              const TrainResult trained = mimir::train(data.tiles, data.labels, all, std::nullopt, net, c.training);
              return Model(make_checkpoint(data.registry, trained, net, c.training));
          },
          py::arg("data_dir"), py::arg("config") = "", "Train one model on every usable subject of a dataset directory");
    m.def("cross_validate",
          [](const std::string& data_dir, const std::string& config) {
              const EngineConfig c = config_from(config);
              CvResult r;
              {
                  py::gil_scoped_release release;
                  const Dataset data = load_dataset(data_dir, c.network).filtered(c.groups);
                  r = mimir::cross_validate(data, c);
              }
              py::dict d = prediction_dict(r.pooled);
              d["fold"] = r.pooled.fold;
              d["report"] = r.report.to_csv();
              return d;
          },
          py::arg("data_dir"), py::arg("config") = "");

    py::class_<Model>(m, "Model")
        .def_static("load", &Model::load, py::arg("path"))
        .def_static("from_bytes", &Model::from_bytes, py::arg("data"))
        .def("save", &Model::save, py::arg("path"))
        .def("to_bytes", &Model::to_bytes)
        .def_property_readonly("targets", &Model::targets)
        .def_property_readonly("input_shape", &Model::input_shape)
        .def_property_readonly("calibration", &Model::calibration)
        .def_property_readonly("metadata", &Model::metadata)
        .def("predict", &Model::predict, py::arg("tiles"), py::arg("ids") = std::vector<std::string>{},
             py::arg("level") = 0.95, "Predictions for network-sized tiles (n, C, H, W)")
        .def("predict_volumes", &Model::predict_volumes, py::arg("paths"), py::arg("level") = 0.95);
}
