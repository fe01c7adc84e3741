#ifndef ZSLFORGE_SIMPLE_ZSL_HPP
#define ZSLFORGE_SIMPLE_ZSL_HPP

#include "zslforge/common.hpp"
#include "zslforge/numeric.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace zslforge {

struct SimpleZslConfig {
  int d_embed = 256;
  double margin = 1.0;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 50;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  // Strict: unknown keys are rejected.
  static SimpleZslConfig from_json(const nlohmann::json& j);
};

// Two affine projections into the joint embedding space.
struct SimpleZslParams {
  ParamTensor W_x;  // d_embed x d_img
  ParamTensor b_x;  // d_embed x 1
  ParamTensor W_t;  // d_embed x d_aux
  ParamTensor b_t;  // d_embed x 1

  static SimpleZslParams init(int d_embed, int d_img, int d_aux, Rng& rng);
  std::vector<ParamTensor*> all();
  std::vector<const ParamTensor*> all() const;
  int d_embed() const { return static_cast<int>(W_x.value.rows()); }
  int d_img() const { return static_cast<int>(W_x.value.cols()); }
  int d_aux() const { return static_cast<int>(W_t.value.cols()); }
};

enum class Side { kImage, kAux };

Vec project(const SimpleZslParams& params, const Vec& v, Side side);

// sum_{i != y} max(0, m - s_y + s_i)
double hinge_loss(const Vec& scores, Eigen::Index y, double margin);

// Mean hinge loss over the batch plus analytic gradients (accumulated into
// the params' grad tensors, which are zeroed first). Rows of `aux` are the
// seen-class vectors; labels index into them.
double loss_and_grad(SimpleZslParams& params, const Mat& images,
                     const std::vector<int>& labels, const Mat& aux, double margin);

double loss_only(const SimpleZslParams& params, const Mat& images, const std::vector<int>& labels,
                 const Mat& aux, double margin);

struct ValMetricPoint {
  int epoch = 0;
  double top1 = 0.0;
  double top5 = 0.0;
};

struct SimpleTrainResult {
  SimpleZslParams params;
  std::vector<double> epoch_loss;
  std::vector<ValMetricPoint> val_history;
  int best_epoch = -1;  // -1 when no validation set was given
};

// Optional validation data evaluated once per epoch; when present the
// returned params are the best-val-top5 snapshot.
struct SimpleValData {
  const Mat* images = nullptr;
  const std::vector<int>* labels = nullptr;  // indices into val aux rows
  const Mat* aux = nullptr;                  // val candidate classes
};

SimpleTrainResult train_simple(const SimpleZslConfig& config, const Mat& aux_seen,
                               const Mat& images, const std::vector<int>& labels,
                               const std::optional<SimpleValData>& val = std::nullopt);

// Candidates ranked by descending dot product between the projections;
// ties broken by ascending candidate index.
std::vector<Eigen::Index> predict_topk(const SimpleZslParams& params, const Vec& image,
                                       const Mat& candidate_aux, int k);

// Batch variant: one ranked row per image.
std::vector<std::vector<Eigen::Index>> predict_topk_batch(const SimpleZslParams& params,
                                                          const Mat& images,
                                                          const Mat& candidate_aux, int k);

void save_simple_checkpoint(const std::string& path, const SimpleZslParams& params,
                            const SimpleZslConfig& config);
std::pair<SimpleZslParams, SimpleZslConfig> load_simple_checkpoint(const std::string& path);

}  // namespace zslforge

#endif  // ZSLFORGE_SIMPLE_ZSL_HPP
