#include "synood/benchmark.hpp"
#include "synood/config.hpp"
#include "synood/errors.hpp"
#include "synood/evaluation.hpp"
#include "synood/features.hpp"
#include "synood/geometry.hpp"
#include "synood/mlp.hpp"
#include "synood/pipeline.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace synood;

namespace {

Box to_box(const std::array<float, 4>& b) { return {b[0], b[1], b[2], b[3]}; }
std::array<float, 4> from_box(const Box& b) { return {b.x, b.y, b.w, b.h}; }

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["fpr95"] = r.fpr95;
  d["auroc"] = r.auroc;
  d["n_id"] = r.n_id;
  d["n_ood"] = r.n_ood;
  d["threshold"] = r.threshold;
  d["fingerprint"] = r.fingerprint;
  d["seed"] = r.seed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Synthetic outlier pipeline core";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<DependencyError>(m, "DependencyError");

  m.def("iou", [](std::array<float, 4> a, std::array<float, 4> b) { return iou(to_box(a), to_box(b)); },
        py::arg("a"), py::arg("b"), "IoU of two [x, y, w, h] boxes.");
  m.def(
      "pad_box",
      [](std::array<float, 4> b, double e, double w, double h) { return from_box(pad_box(to_box(b), e, w, h)); },
      py::arg("box"), py::arg("e"), py::arg("image_width"), py::arg("image_height"));

  m.def(
      "cosine_similarity",
      [](const std::vector<double>& a, const std::vector<double>& b) { return cosine_similarity(a, b); },
      py::arg("a"), py::arg("b"));

  m.def(
      "fpr_at_tpr",
      [](const std::vector<double>& id, const std::vector<double>& ood, double target) {
        const auto r = fpr_at_tpr(id, ood, target);
        return py::make_tuple(r.fpr, r.threshold);
      },
      py::arg("id_scores"), py::arg("ood_scores"), py::arg("tpr_target") = 0.95,
      "Returns (fpr, threshold).");
  m.def(
      "auroc", [](const std::vector<double>& id, const std::vector<double>& ood) { return auroc(id, ood); },
      py::arg("id_scores"), py::arg("ood_scores"));
  m.def(
      "bce_loss", [](const std::vector<double>& id, const std::vector<double>& ood) { return bce_loss(id, ood); },
      py::arg("id_logits"), py::arg("ood_logits"));

  py::class_<MlpModel>(m, "MlpModel")
      .def_property_readonly("layer_dims", [](const MlpModel& mm) { return mm.layer_dims; })
      .def_property_readonly("parameter_count", &MlpModel::parameter_count)
      .def("parameters", [](const MlpModel& mm) { return flatten_parameters(mm); })
      .def("logits", [](const MlpModel& mm, const FeatureMatrix& x) { return forward_batch(mm, x); }, py::arg("x"))
      .def("scores", [](const MlpModel& mm, const FeatureMatrix& x) { return score_batch(mm, x); }, py::arg("x"))
      .def("save", [](const MlpModel& mm, const std::filesystem::path& p) { write_model(p, mm); })
      .def_static("load", &read_model);

  m.def(
      "init_model",
      [](std::size_t d, std::array<std::size_t, 2> hidden, std::uint64_t seed) { return init_model(d, hidden, seed); },
      py::arg("dim"), py::arg("hidden") = std::array<std::size_t, 2>{512, 128}, py::arg("seed") = 0);

  m.def(
      "train",
      [](const MlpModel& model, const FeatureMatrix& id, const FeatureMatrix& ood, double lr, std::size_t epochs,
         std::size_t batch_size, double momentum, double dropout, std::uint64_t seed) {
        TrainConfig cfg;
        cfg.learning_rate = lr;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.momentum = momentum;
        cfg.dropout = dropout;
        cfg.seed = seed;
        cfg.hidden = {model.layer_dims[1], model.layer_dims[2]};
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(model, id, ood, cfg);
        }
        return py::make_tuple(std::move(result.model), std::move(result.loss_curve));
      },
      py::arg("model"), py::arg("id_features"), py::arg("ood_features"), py::arg("learning_rate") = 1e-4,
      py::arg("epochs") = 30, py::arg("batch_size") = 32, py::arg("momentum") = 0.9, py::arg("dropout") = 0.5,
      py::arg("seed") = 0, "Returns (model, loss_curve).");

  m.def(
      "evaluate",
      [](const MlpModel& model, const FeatureMatrix& id, const FeatureMatrix& ood) {
        return report_dict(evaluate(model, id, ood));
      },
      py::arg("model"), py::arg("id_features"), py::arg("ood_features"));

  m.def(
      "read_feature_archive",
      [](const std::filesystem::path& path) {
        const auto records = read_feature_archive(path);
        std::vector<std::uint64_t> ids;
        for (const auto& r : records) ids.push_back(r.record_id);
        return py::make_tuple(ids, to_matrix(records));
      },
      py::arg("path"), "Returns (record_ids, features) with one row per record.");

  m.def(
      "generate_feature_world",
      [](const std::filesystem::path& out, std::uint32_t dim, std::size_t n_id, std::size_t n_ood, double separation,
         double contamination, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.feature_dim = dim;
        spec.n_id = n_id;
        spec.n_ood = n_ood;
        spec.separation = separation;
        spec.contamination = contamination;
        spec.seed = seed;
        write_feature_world(out, generate_feature_world(spec));
      },
      py::arg("out_dir"), py::arg("dim") = 16, py::arg("n_id") = 500, py::arg("n_ood") = 500,
      py::arg("separation") = 6.0, py::arg("contamination") = 0.0, py::arg("seed") = 0);

  m.def(
      "run_feature_experiment",
      [](std::size_t n_id, std::size_t n_ood, double separation, double contamination, bool filter,
         std::size_t epochs, std::uint64_t seed) {
        FeatureExperiment e;
        e.world.n_id = n_id;
        e.world.n_ood = n_ood;
        e.world.separation = separation;
        e.world.contamination = contamination;
        e.world.seed = seed;
        e.train.epochs = epochs;
        if (!filter) e.filter.reset();
        py::gil_scoped_release release;
        return run_feature_experiment(e);
      },
      py::arg("n_id") = 500, py::arg("n_ood") = 500, py::arg("separation") = 6.0, py::arg("contamination") = 0.0,
      py::arg("filter") = true, py::arg("epochs") = 30, py::arg("seed") = 0);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("fpr95", &EvalReport::fpr95)
      .def_readonly("auroc", &EvalReport::auroc)
      .def_readonly("n_id", &EvalReport::n_id)
      .def_readonly("n_ood", &EvalReport::n_ood)
      .def_readonly("threshold", &EvalReport::threshold)
      .def_readonly("fingerprint", &EvalReport::fingerprint)
      .def_readonly("seed", &EvalReport::seed)
      .def("as_dict", &report_dict);

  m.def(
      "generate_image_world",
      [](const std::filesystem::path& out, std::size_t n, std::uint64_t seed) {
        generate_image_world(n, seed, out);
        auto config = image_world_config(n);
        config.seed = seed;
        save_config(out / "config.json", config);
        return out / "config.json";
      },
      py::arg("out_dir"), py::arg("n_images") = 100, py::arg("seed") = 0,
      "Writes the dataset plus a config.json and returns the config path.");

  m.def(
      "run_pipeline",
      [](const std::filesystem::path& config_path, std::optional<std::uint64_t> seed, bool force) {
        auto config = load_config(std::filesystem::absolute(config_path));
        if (seed) {
          config.seed = *seed;
          config.train.seed = *seed;
          config.benchmark.world.seed = *seed;
        }
        EvalReport report;
        {
          py::gil_scoped_release release;
          Pipeline p(config);
          report = p.run_all(force);
        }
        return report;
      },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("force") = false);
}
