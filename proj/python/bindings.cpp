#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "zslforge/cada_vae.hpp"
#include "zslforge/common.hpp"
#include "zslforge/eval.hpp"
#include "zslforge/hpo.hpp"
#include "zslforge/numeric.hpp"
#include "zslforge/simple_zsl.hpp"
#include "zslforge/synthetic.hpp"
#include "zslforge/text_encoding.hpp"

#include <nlohmann/json.hpp>

namespace py = pybind11;
using namespace zslforge;

namespace {

Mat array_to_mat(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DataError("expected a 2-d array");
  Mat m(a.shape(0), a.shape(1));
  std::memcpy(m.data(), a.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  return m;
}

py::array_t<double> mat_to_array(const Mat& m) {
  py::array_t<double> a({m.rows(), m.cols()});
  std::memcpy(a.mutable_data(), m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "zslforge core: zero-shot classification over precomputed features";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "ZslforgeError");

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def(
      "plan_chunks",
      [](int n_tokens, int window, int overlap) {
        return plan_chunks(n_tokens, window, overlap).spans;
      },
      py::arg("n_tokens"), py::arg("window") = 256, py::arg("overlap") = 50);
  m.def(
      "warmup_weight",
      [](double factor, int start, int end, int epoch) {
        return WarmupSchedule(factor, start, end).weight(epoch);
      },
      py::arg("factor"), py::arg("start"), py::arg("end"), py::arg("epoch"));
  m.def("adjust_for_missing", &adjust_for_missing, py::arg("mean_present"), py::arg("n_present"),
        py::arg("n_total"));
  m.def(
      "hinge_loss",
      [](const std::vector<double>& scores, int y, double margin) {
        Vec s(static_cast<Eigen::Index>(scores.size()));
        for (std::size_t i = 0; i < scores.size(); ++i) s(static_cast<Eigen::Index>(i)) = scores[i];
        return hinge_loss(s, y, margin);
      },
      py::arg("scores"), py::arg("y"), py::arg("margin"));
  m.def(
      "kl_divergence",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& mu,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& logvar) {
        return kl_divergence(array_to_mat(mu), array_to_mat(logvar));
      },
      py::arg("mu"), py::arg("logvar"));
  m.def(
      "sample_log_uniform",
      [](double lo, double hi, std::uint64_t seed) {
        Rng rng = make_rng(seed);
        return sample_log_uniform(lo, hi, rng);
      },
      py::arg("lo"), py::arg("hi"), py::arg("seed") = 0);
  m.def(
      "sample_simple_config",
      [](std::uint64_t seed) {
        Rng rng = make_rng(seed);
        return sample_simple_config(rng).to_json().dump();
      },
      py::arg("seed") = 0);
  m.def(
      "sample_cada_config",
      [](std::uint64_t seed) {
        Rng rng = make_rng(seed);
        return sample_cada_config(rng).to_json().dump();
      },
      py::arg("seed") = 0);

  m.def(
      "generate_synthetic",
      [](int n_classes, int n_seen, int d_proto, int d_img, int d_aux, int samples_per_class,
         double noise_scale, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.n_classes = n_classes;
        spec.n_seen = n_seen;
        spec.d_proto = d_proto;
        spec.d_img = d_img;
        spec.d_aux = d_aux;
        spec.samples_per_class = samples_per_class;
        spec.noise_scale = noise_scale;
        spec.seed = seed;
        const SyntheticBundle b = generate_synthetic(spec);
        py::dict out;
        out["images"] = mat_to_array(b.images.as_f64());
        out["aux"] = mat_to_array(b.aux.as_f64());
        out["labels"] = b.labels;
        out["train_wnids"] = b.train.wnids;
        out["test_wnids"] = b.test.wnids;
        out["wnids"] = b.registry.order;
        return out;
      },
      py::arg("n_classes") = 20, py::arg("n_seen") = 15, py::arg("d_proto") = 16,
      py::arg("d_img") = 32, py::arg("d_aux") = 16, py::arg("samples_per_class") = 100,
      py::arg("noise_scale") = 0.05, py::arg("seed") = 0);

  py::class_<SimpleZslParams>(m, "SimpleZslParams");

  m.def(
      "train_simple",
      [](const std::string& config_json,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& aux_seen,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& images,
         const std::vector<int>& labels) {
        const SimpleZslConfig config =
            SimpleZslConfig::from_json(nlohmann::json::parse(config_json));
        SimpleTrainResult r = train_simple(config, array_to_mat(aux_seen), array_to_mat(images),
                                           labels);
        return py::make_tuple(std::move(r.params), r.epoch_loss);
      },
      py::arg("config_json"), py::arg("aux_seen"), py::arg("images"), py::arg("labels"));

  m.def(
      "predict_topk",
      [](const SimpleZslParams& params,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& images,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& candidate_aux,
         int k) {
        const auto preds = predict_topk_batch(params, array_to_mat(images),
                                              array_to_mat(candidate_aux), k);
        std::vector<std::vector<long>> out;
        out.reserve(preds.size());
        for (const auto& row : preds) out.emplace_back(row.begin(), row.end());
        return out;
      },
      py::arg("params"), py::arg("images"), py::arg("candidate_aux"), py::arg("k"));

  m.def(
      "mean_per_class_topk",
      [](const std::vector<std::vector<long>>& predictions, const std::vector<int>& labels,
         const std::vector<int>& ks, int n_classes) {
        std::vector<std::vector<Eigen::Index>> preds;
        preds.reserve(predictions.size());
        for (const auto& row : predictions) preds.emplace_back(row.begin(), row.end());
        std::vector<std::string> order;
        for (int c = 0; c < n_classes; ++c) order.push_back("class" + std::to_string(c));
        const EvalReport r = per_class_topk(preds, labels, ks, order);
        py::dict out;
        for (int k : ks) out[py::int_(k)] = r.mean_topk.at(k);
        return out;
      },
      py::arg("predictions"), py::arg("labels"), py::arg("ks"), py::arg("n_classes"));
}
