#include "zslforge/simple_zsl.hpp"

#include "zslforge/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace zslforge {

using nlohmann::json;

void SimpleZslConfig::validate() const {
  if (d_embed < 1) throw ConfigError("simple config: d_embed must be >= 1");
  if (margin < 0) throw ConfigError("simple config: margin must be >= 0");
  if (batch_size < 1) throw ConfigError("simple config: batch_size must be >= 1");
  if (learning_rate <= 0) throw ConfigError("simple config: learning_rate must be > 0");
  if (epochs < 0) throw ConfigError("simple config: epochs must be >= 0");
}

json SimpleZslConfig::to_json() const {
  return json{{"d_embed", d_embed},     {"margin", margin}, {"batch_size", batch_size},
              {"learning_rate", learning_rate}, {"beta1", beta1},  {"beta2", beta2},
              {"eps", eps},             {"epochs", epochs}, {"seed", seed}};
}

SimpleZslConfig SimpleZslConfig::from_json(const json& j) {
  static const std::vector<std::string> known = {"d_embed", "margin", "batch_size",
                                                 "learning_rate", "beta1", "beta2",
                                                 "eps",     "epochs", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("simple config: unknown key '" + it.key() + "'");
  }
  SimpleZslConfig c;
  if (j.contains("d_embed")) c.d_embed = j["d_embed"].get<int>();
  if (j.contains("margin")) c.margin = j["margin"].get<double>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("beta1")) c.beta1 = j["beta1"].get<double>();
  if (j.contains("beta2")) c.beta2 = j["beta2"].get<double>();
  if (j.contains("eps")) c.eps = j["eps"].get<double>();
  if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  c.validate();
  return c;
}

SimpleZslParams SimpleZslParams::init(int d_embed, int d_img, int d_aux, Rng& rng) {
  SimpleZslParams p;
  p.W_x = init_linear("W_x", d_embed, d_img, rng);
  p.b_x = init_bias("b_x", d_embed);
  p.W_t = init_linear("W_t", d_embed, d_aux, rng);
  p.b_t = init_bias("b_t", d_embed);
  return p;
}

std::vector<ParamTensor*> SimpleZslParams::all() { return {&W_x, &b_x, &W_t, &b_t}; }

std::vector<const ParamTensor*> SimpleZslParams::all() const {
  return {&W_x, &b_x, &W_t, &b_t};
}

Vec project(const SimpleZslParams& params, const Vec& v, Side side) {
  const ParamTensor& W = side == Side::kImage ? params.W_x : params.W_t;
  const ParamTensor& b = side == Side::kImage ? params.b_x : params.b_t;
  if (v.size() != W.value.cols())
    throw DataError("project: vector dim " + std::to_string(v.size()) + " != " +
                    std::to_string(W.value.cols()));
  return W.value * v + b.value.col(0);
}

double hinge_loss(const Vec& scores, Eigen::Index y, double margin) {
  if (y < 0 || y >= scores.size()) throw DataError("hinge_loss: label out of range");
  double loss = 0.0;
  const double sy = scores(y);
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (i == y) continue;
    loss += std::max(0.0, margin - sy + scores(i));
  }
  return loss;
}

namespace {

// Shared forward for the batch: projections and score matrix.
struct Forward {
  Mat px;  // B x E
  Mat pt;  // K x E
  Mat scores;  // B x K
};

Forward forward_batch(const SimpleZslParams& params, const Mat& images, const Mat& aux) {
  Forward f;
  f.px = images * params.W_x.value.transpose();
  f.px.rowwise() += params.b_x.value.col(0).transpose();
  f.pt = aux * params.W_t.value.transpose();
  f.pt.rowwise() += params.b_t.value.col(0).transpose();
  f.scores = f.px * f.pt.transpose();
  return f;
}

void check_labels(const std::vector<int>& labels, Eigen::Index n_rows, Eigen::Index n_classes) {
  if (static_cast<Eigen::Index>(labels.size()) != n_rows)
    throw DataError("batch: labels/rows mismatch");
  for (int y : labels) {
    if (y < 0 || y >= n_classes)
      throw DataError("batch: label " + std::to_string(y) + " out of range");
  }
}

}  // namespace

double loss_and_grad(SimpleZslParams& params, const Mat& images, const std::vector<int>& labels,
                     const Mat& aux, double margin) {
  check_labels(labels, images.rows(), aux.rows());
  for (ParamTensor* p : params.all()) p->zero_grad();

  const Eigen::Index batch = images.rows();
  const Forward f = forward_batch(params, images, aux);

  double loss = 0.0;
  Mat d_scores = Mat::Zero(batch, aux.rows());
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::Index y = labels[static_cast<std::size_t>(b)];
    const double sy = f.scores(b, y);
    for (Eigen::Index i = 0; i < aux.rows(); ++i) {
      if (i == y) continue;
      const double violation = margin - sy + f.scores(b, i);
      if (violation > 0.0) {  // subgradient 0 exactly at the kink
        loss += violation;
        d_scores(b, i) += 1.0;
        d_scores(b, y) -= 1.0;
      }
    }
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);
  loss *= inv_batch;
  d_scores *= inv_batch;

  const Mat d_px = d_scores * f.pt;             // B x E
  const Mat d_pt = d_scores.transpose() * f.px;  // K x E
  params.W_x.grad = d_px.transpose() * images;
  params.b_x.grad = d_px.colwise().sum().transpose();
  params.W_t.grad = d_pt.transpose() * aux;
  params.b_t.grad = d_pt.colwise().sum().transpose();
  return loss;
}

double loss_only(const SimpleZslParams& params, const Mat& images, const std::vector<int>& labels,
                 const Mat& aux, double margin) {
  check_labels(labels, images.rows(), aux.rows());
  const Forward f = forward_batch(params, images, aux);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < images.rows(); ++b) {
    loss += hinge_loss(f.scores.row(b).transpose(), labels[static_cast<std::size_t>(b)], margin);
  }
  return loss / static_cast<double>(images.rows());
}

namespace {

// Mean per-class top-k accuracy over ranked score rows; local helper for the
// per-epoch validation hook (the eval module owns the full report).
void val_topk_means(const Mat& scores, const std::vector<int>& labels, double& top1,
                    double& top5) {
  const Eigen::Index n_classes = scores.cols();
  std::vector<double> hit1(n_classes, 0.0), hit5(n_classes, 0.0), count(n_classes, 0.0);
  std::vector<Eigen::Index> order(n_classes);
  const int k5 = static_cast<int>(std::min<Eigen::Index>(5, n_classes));
  for (Eigen::Index b = 0; b < scores.rows(); ++b) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
      if (scores(b, a) != scores(b, c)) return scores(b, a) > scores(b, c);
      return a < c;
    });
    const int y = labels[static_cast<std::size_t>(b)];
    count[y] += 1.0;
    if (order[0] == y) hit1[y] += 1.0;
    for (int i = 0; i < k5; ++i) {
      if (order[static_cast<std::size_t>(i)] == y) {
        hit5[y] += 1.0;
        break;
      }
    }
  }
  double sum1 = 0.0, sum5 = 0.0;
  int present = 0;
  for (Eigen::Index c = 0; c < n_classes; ++c) {
    if (count[c] == 0.0) continue;
    sum1 += hit1[c] / count[c];
    sum5 += hit5[c] / count[c];
    ++present;
  }
  top1 = present ? sum1 / present : 0.0;
  top5 = present ? sum5 / present : 0.0;
}

}  // namespace

SimpleTrainResult train_simple(const SimpleZslConfig& config, const Mat& aux_seen,
                               const Mat& images, const std::vector<int>& labels,
                               const std::optional<SimpleValData>& val) {
  config.validate();
  if (images.rows() == 0) throw DataError("train_simple: empty training set");
  check_labels(labels, images.rows(), aux_seen.rows());

  Rng init_rng = make_rng(config.seed);
  SimpleTrainResult result;
  result.params = SimpleZslParams::init(config.d_embed, static_cast<int>(images.cols()),
                                        static_cast<int>(aux_seen.cols()), init_rng);

  AdamHyper hyper;
  hyper.lr = config.learning_rate;
  hyper.beta1 = config.beta1;
  hyper.beta2 = config.beta2;
  hyper.eps = config.eps;
  AdamOptimizer opt(hyper, result.params.all());

  const Eigen::Index n = images.rows();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  double best_top5 = -1.0;
  SimpleZslParams best;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng = make_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index bsize = std::min<Eigen::Index>(config.batch_size, n - start);
      Mat xb(bsize, images.cols());
      std::vector<int> yb(static_cast<std::size_t>(bsize));
      for (Eigen::Index i = 0; i < bsize; ++i) {
        xb.row(i) = images.row(perm[static_cast<std::size_t>(start + i)]);
        yb[static_cast<std::size_t>(i)] =
            labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(start + i)])];
      }
      const double batch_loss = loss_and_grad(result.params, xb, yb, aux_seen, config.margin);
      opt.step(result.params.all());
      loss_sum += batch_loss * static_cast<double>(bsize);
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(n));

    if (val && val->images != nullptr) {
      const Forward f = forward_batch(result.params, *val->images, *val->aux);
      ValMetricPoint point;
      point.epoch = epoch;
      val_topk_means(f.scores, *val->labels, point.top1, point.top5);
      result.val_history.push_back(point);
      if (point.top5 > best_top5) {
        best_top5 = point.top5;
        best = result.params;
        result.best_epoch = epoch;
      }
    }
  }

  if (result.best_epoch >= 0) result.params = std::move(best);
  return result;
}

std::vector<Eigen::Index> predict_topk(const SimpleZslParams& params, const Vec& image,
                                       const Mat& candidate_aux, int k) {
  Mat img(1, image.size());
  img.row(0) = image.transpose();
  return predict_topk_batch(params, img, candidate_aux, k).front();
}

std::vector<std::vector<Eigen::Index>> predict_topk_batch(const SimpleZslParams& params,
                                                          const Mat& images,
                                                          const Mat& candidate_aux, int k) {
  if (k < 1 || k > candidate_aux.rows())
    throw DataError("predict: k=" + std::to_string(k) + " out of range for " +
                    std::to_string(candidate_aux.rows()) + " candidates");
  const Forward f = forward_batch(params, images, candidate_aux);
  std::vector<std::vector<Eigen::Index>> out;
  out.reserve(static_cast<std::size_t>(images.rows()));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(candidate_aux.rows()));
  for (Eigen::Index b = 0; b < images.rows(); ++b) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
      if (f.scores(b, a) != f.scores(b, c)) return f.scores(b, a) > f.scores(b, c);
      return a < c;
    });
    out.emplace_back(order.begin(), order.begin() + k);
  }
  return out;
}

void save_simple_checkpoint(const std::string& path, const SimpleZslParams& params,
                            const SimpleZslConfig& config) {
  Checkpoint ckpt;
  ckpt.header = json{{"model", "simple_zsl"},
                     {"config", config.to_json()},
                     {"d_embed", params.d_embed()},
                     {"d_img", params.d_img()},
                     {"d_aux", params.d_aux()}};
  ckpt.tensors.emplace_back("W_x", params.W_x.value);
  ckpt.tensors.emplace_back("b_x", params.b_x.value);
  ckpt.tensors.emplace_back("W_t", params.W_t.value);
  ckpt.tensors.emplace_back("b_t", params.b_t.value);
  write_checkpoint(path, ckpt);
}

std::pair<SimpleZslParams, SimpleZslConfig> load_simple_checkpoint(const std::string& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.header.value("model", "") != "simple_zsl")
    throw FormatError(path + ": not a simple_zsl checkpoint");
  SimpleZslConfig config = SimpleZslConfig::from_json(ckpt.header.at("config"));
  SimpleZslParams params;
  params.W_x = ParamTensor("W_x", ckpt.tensor("W_x").rows(), ckpt.tensor("W_x").cols());
  params.W_x.value = ckpt.tensor("W_x");
  params.b_x = ParamTensor("b_x", ckpt.tensor("b_x").rows(), 1);
  params.b_x.value = ckpt.tensor("b_x");
  params.W_t = ParamTensor("W_t", ckpt.tensor("W_t").rows(), ckpt.tensor("W_t").cols());
  params.W_t.value = ckpt.tensor("W_t");
  params.b_t = ParamTensor("b_t", ckpt.tensor("b_t").rows(), 1);
  params.b_t.value = ckpt.tensor("b_t");
  return {std::move(params), config};
}

}  // namespace zslforge
