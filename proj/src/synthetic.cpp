#include "zslforge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace zslforge {

using nlohmann::json;

void SyntheticSpec::validate() const {
  if (n_classes < 2) throw ConfigError("synthetic spec: need at least 2 classes");
  if (n_seen < 1 || n_seen >= n_classes)
    throw ConfigError("synthetic spec: need 1 <= n_seen < n_classes");
  if (d_proto < 1 || d_img < 1 || d_aux < 1) throw ConfigError("synthetic spec: dims must be >= 1");
  if (samples_per_class < 1) throw ConfigError("synthetic spec: samples_per_class must be >= 1");
  if (noise_scale < 0) throw ConfigError("synthetic spec: noise_scale must be >= 0");
}

json SyntheticSpec::to_json() const {
  return json{{"n_classes", n_classes},
              {"n_seen", n_seen},
              {"d_proto", d_proto},
              {"d_img", d_img},
              {"d_aux", d_aux},
              {"samples_per_class", samples_per_class},
              {"noise_scale", noise_scale},
              {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  static const std::vector<std::string> known = {"n_classes", "n_seen",  "d_proto",
                                                 "d_img",     "d_aux",   "samples_per_class",
                                                 "noise_scale", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("synthetic spec: unknown key '" + it.key() + "'");
  }
  SyntheticSpec s;
  if (j.contains("n_classes")) s.n_classes = j["n_classes"].get<int>();
  if (j.contains("n_seen")) s.n_seen = j["n_seen"].get<int>();
  if (j.contains("d_proto")) s.d_proto = j["d_proto"].get<int>();
  if (j.contains("d_img")) s.d_img = j["d_img"].get<int>();
  if (j.contains("d_aux")) s.d_aux = j["d_aux"].get<int>();
  if (j.contains("samples_per_class")) s.samples_per_class = j["samples_per_class"].get<int>();
  if (j.contains("noise_scale")) s.noise_scale = j["noise_scale"].get<double>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  s.validate();
  return s;
}

namespace {

std::string synthetic_wnid(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "n%08d", index + 1);
  return buf;
}

Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * normal(rng);
  return m;
}

// Orthonormal columns keep the instance well conditioned: class norms carry
// over exactly, so a linear map solves the task regardless of the draw.
Mat orthonormal_link(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const Mat g = gaussian_matrix(rows, cols, rng, 1.0);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  return q;
}

}  // namespace

SyntheticBundle generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed);

  SyntheticBundle bundle;
  for (int c = 0; c < spec.n_classes; ++c) {
    ClassRecord rec;
    rec.wnid = synthetic_wnid(c);
    rec.phrases = {"synthetic class " + std::to_string(c + 1)};
    rec.gloss = "synthetic prototype class " + std::to_string(c + 1);
    bundle.registry.add(std::move(rec));
  }
  bundle.train.name = "train";
  bundle.test.name = "test";
  for (int c = 0; c < spec.n_classes; ++c) {
    if (c < spec.n_seen) {
      bundle.train.wnids.push_back(bundle.registry.order[static_cast<std::size_t>(c)]);
    } else {
      bundle.test.wnids.push_back(bundle.registry.order[static_cast<std::size_t>(c)]);
    }
  }

  if (spec.d_aux < spec.d_proto || spec.d_img < spec.d_proto)
    throw ConfigError("synthetic spec: d_aux and d_img must be >= d_proto");
  bundle.prototypes = gaussian_matrix(spec.n_classes, spec.d_proto, rng, 1.0);
  const Mat aux_link = orthonormal_link(spec.d_aux, spec.d_proto, rng);
  const Mat img_link = orthonormal_link(spec.d_img, spec.d_proto, rng);

  bundle.aux.data.resize(spec.n_classes, spec.d_aux);
  for (int c = 0; c < spec.n_classes; ++c) {
    bundle.aux.ids.push_back(bundle.registry.order[static_cast<std::size_t>(c)]);
    bundle.aux.data.row(c) =
        (aux_link * bundle.prototypes.row(c).transpose()).transpose().cast<float>();
  }

  const int n_samples = spec.n_classes * spec.samples_per_class;
  bundle.images.data.resize(n_samples, spec.d_img);
  bundle.labels.reserve(static_cast<std::size_t>(n_samples));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Index row = 0;
  for (int c = 0; c < spec.n_classes; ++c) {
    const Vec mean = img_link * bundle.prototypes.row(c).transpose();
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (int j = 0; j < spec.d_img; ++j)
        bundle.images.data(row, j) =
            static_cast<float>(mean(j) + spec.noise_scale * normal(rng));
      bundle.images.ids.push_back(bundle.registry.order[static_cast<std::size_t>(c)] + "#" +
                                  std::to_string(s));
      bundle.labels.push_back(c);
    }
  }
  return bundle;
}

}  // namespace zslforge
