#ifndef ZSLFORGE_SYNTHETIC_HPP
#define ZSLFORGE_SYNTHETIC_HPP

#include "zslforge/common.hpp"
#include "zslforge/corpus.hpp"

#include <nlohmann/json.hpp>

namespace zslforge {

// Deterministic class-prototype dataset: aux vectors are an exact linear
// image of the prototypes, image samples a noisy one, so a linear zero-shot
// map to near-perfect unseen accuracy is guaranteed to exist.
struct SyntheticSpec {
  int n_classes = 20;
  int n_seen = 15;
  int d_proto = 16;
  int d_img = 32;
  int d_aux = 16;
  int samples_per_class = 100;
  double noise_scale = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

struct SyntheticBundle {
  ClassRegistry registry;
  Split train;  // seen classes, registry order
  Split test;   // unseen classes
  FeatureMatrix images;     // ids "wnid#index"
  std::vector<int> labels;  // class index (into registry.order) per image row
  FeatureMatrix aux;        // one row per class, ids are wnids
  Mat prototypes;           // n_classes x d_proto
};

SyntheticBundle generate_synthetic(const SyntheticSpec& spec);

}  // namespace zslforge

#endif  // ZSLFORGE_SYNTHETIC_HPP
