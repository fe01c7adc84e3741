#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "zslforge/simple_zsl.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

using namespace zslforge;
namespace fs = std::filesystem;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

// Relative error with a floor: central differences carry ~|f|*eps_mach/h of
// rounding noise, so exactly-zero gradient pairs need an absolute band.
double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-4});
  return std::abs(a - b) / scale;
}

}  // namespace

TEST_CASE("project applies the affine map per side") {
  SimpleZslParams p;
  p.W_x = ParamTensor("W_x", 2, 2);
  p.W_x.value << 1, 0, 0, 1;
  p.b_x = ParamTensor("b_x", 2, 1);
  p.W_t = ParamTensor("W_t", 1, 1);
  p.W_t.value << 2;
  p.b_t = ParamTensor("b_t", 1, 1);
  p.b_t.value << 1;

  SUBCASE("identity") {
    const Vec v = (Vec(2) << 3.0, -1.0).finished();
    CHECK((project(p, v, Side::kImage) - v).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("scalar affine") {
    const Vec v = (Vec(1) << 3.0).finished();
    CHECK(project(p, v, Side::kAux)(0) == doctest::Approx(7.0));
  }
  SUBCASE("zero W gives the constant bias") {
    p.W_t.value << 0;
    for (double x : {-5.0, 0.0, 2.5}) {
      const Vec v = (Vec(1) << x).finished();
      CHECK(project(p, v, Side::kAux)(0) == doctest::Approx(1.0));
    }
  }
  SUBCASE("dimension mismatch") {
    const Vec bad = Vec::Zero(3);
    CHECK_THROWS_AS(project(p, bad, Side::kImage), DataError);
  }
}

TEST_CASE("hinge loss matches the summed-margin definition") {
  const Vec s = (Vec(3) << 2.0, 0.5, -1.0).finished();
  CHECK(hinge_loss(s, 0, 1.0) == doctest::Approx(0.0));
  CHECK(hinge_loss(s, 0, 2.0) == doctest::Approx(0.5));
  SUBCASE("zero margin with a strict maximum") {
    CHECK(hinge_loss(s, 0, 0.0) == doctest::Approx(0.0));
  }
  SUBCASE("label out of range") {
    CHECK_THROWS_AS(hinge_loss(s, 3, 1.0), DataError);
  }
}

TEST_CASE("hinge loss properties") {
  Rng rng = make_rng(17);
  std::uniform_real_distribution<double> margin_dist(0.0, 3.0);
  for (int iter = 0; iter < 200; ++iter) {
    const int k = 2 + static_cast<int>(iter % 6);
    Vec s = random_mat(k, 1, rng).col(0);
    const Eigen::Index y = iter % k;
    const double m = margin_dist(rng);
    const double loss = hinge_loss(s, y, m);
    CHECK(loss >= 0.0);

    // zero iff every margin is satisfied
    bool satisfied = true;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (i != y && s(y) - s(i) < m) satisfied = false;
    }
    CHECK((loss == 0.0) == satisfied);

    // invariant under adding a constant to all scores
    const Vec shifted = s.array() + 3.7;
    CHECK(rel_err(hinge_loss(shifted, y, m), loss) <= 1e-9);
  }
}

TEST_CASE("loss_and_grad on a hand-computed scalar instance") {
  SimpleZslParams p;
  p.W_x = ParamTensor("W_x", 1, 1);
  p.W_x.value << 2.0;
  p.b_x = ParamTensor("b_x", 1, 1);
  p.b_x.value << 0.5;
  p.W_t = ParamTensor("W_t", 1, 1);
  p.W_t.value << -1.0;
  p.b_t = ParamTensor("b_t", 1, 1);
  p.b_t.value << 1.0;

  Mat images(1, 1);
  images << 3.0;
  Mat aux(2, 1);
  aux << 1.0, -2.0;

  const double loss = loss_and_grad(p, images, {0}, aux, 1.0);
  CHECK(loss == doctest::Approx(20.5));
  CHECK(p.W_x.grad(0, 0) == doctest::Approx(9.0));
  CHECK(p.b_x.grad(0, 0) == doctest::Approx(3.0));
  CHECK(p.W_t.grad(0, 0) == doctest::Approx(-19.5));
  CHECK(p.b_t.grad(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("satisfied margins give zero loss and zero gradients") {
  SimpleZslParams p;
  p.W_x = ParamTensor("W_x", 1, 1);
  p.W_x.value << 1.0;
  p.b_x = ParamTensor("b_x", 1, 1);
  p.W_t = ParamTensor("W_t", 1, 1);
  p.W_t.value << 1.0;
  p.b_t = ParamTensor("b_t", 1, 1);

  // x=10 paired with aux 1 vs -1: s_y = 100, s_other = -100, margin easily met
  Mat images(1, 1);
  images << 10.0;
  Mat aux(2, 1);
  aux << 10.0, -10.0;
  const double loss = loss_and_grad(p, images, {0}, aux, 1.0);
  CHECK(loss == 0.0);
  for (const ParamTensor* t : p.all()) CHECK(t->grad.isZero(0.0));
}

namespace {

// Central differences are only valid away from the hinge kink; reject draws
// where any margin term sits within the safety band of zero.
bool clear_of_hinge_kinks(const SimpleZslParams& p, const Mat& images,
                          const std::vector<int>& labels, const Mat& aux, double margin,
                          double band) {
  for (Eigen::Index b = 0; b < images.rows(); ++b) {
    const Vec px = project(p, images.row(b).transpose(), Side::kImage);
    Vec scores(aux.rows());
    for (Eigen::Index c = 0; c < aux.rows(); ++c)
      scores(c) = px.dot(project(p, aux.row(c).transpose(), Side::kAux));
    const int y = labels[static_cast<std::size_t>(b)];
    for (Eigen::Index i = 0; i < aux.rows(); ++i) {
      if (i == y) continue;
      if (std::abs(margin - scores(y) + scores(i)) < band) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("analytic hinge gradients match finite differences") {
  int checked_seeds = 0;
  for (std::uint64_t seed = 0; checked_seeds < 5 && seed < 100; ++seed) {
    Rng rng = make_rng(seed);
    const int d_img = 3 + static_cast<int>(seed % 3);
    const int d_aux = 2 + static_cast<int>(seed % 4);
    const int d_embed = 2 + static_cast<int>(seed % 3);
    const int k = 3, batch = 4;

    SimpleZslParams p = SimpleZslParams::init(d_embed, d_img, d_aux, rng);
    const Mat images = random_mat(batch, d_img, rng);
    const Mat aux = random_mat(k, d_aux, rng);
    std::vector<int> labels(batch);
    for (int i = 0; i < batch; ++i) labels[i] = i % k;
    const double margin = 0.7;
    if (!clear_of_hinge_kinks(p, images, labels, aux, margin, 1e-3)) continue;
    ++checked_seeds;

    loss_and_grad(p, images, labels, aux, margin);
    const std::vector<Mat> analytic = {p.W_x.grad, p.b_x.grad, p.W_t.grad, p.b_t.grad};

    const auto params = p.all();
    const std::vector<Mat> fd = finite_diff_grad(
        [&] { return loss_only(p, images, labels, aux, margin); }, params);

    for (std::size_t t = 0; t < params.size(); ++t) {
      for (Eigen::Index i = 0; i < analytic[t].rows(); ++i) {
        for (Eigen::Index j = 0; j < analytic[t].cols(); ++j) {
          CHECK(rel_err(analytic[t](i, j), fd[t](i, j)) <= 1e-4);
        }
      }
    }
  }
  CHECK(checked_seeds == 5);
}

namespace {

// Tiny linearly-linked instance: aux vectors are the prototypes themselves.
struct TinyTask {
  Mat aux;
  Mat images;
  std::vector<int> labels;
};

TinyTask make_tiny_task(std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const int k = 4, d = 3, per_class = 12;
  TinyTask task;
  task.aux = random_mat(k, d, rng);
  task.images.resize(k * per_class, d);
  for (int c = 0; c < k; ++c) {
    for (int s = 0; s < per_class; ++s) {
      task.images.row(c * per_class + s) =
          task.aux.row(c) + 0.05 * random_mat(1, d, rng).row(0);
      task.labels.push_back(c);
    }
  }
  return task;
}

}  // namespace

TEST_CASE("training reduces the loss on linearly-linked data") {
  const TinyTask task = make_tiny_task(5);
  SimpleZslConfig config;
  config.d_embed = 8;
  config.batch_size = 16;
  config.learning_rate = 0.01;
  config.epochs = 30;
  config.seed = 1;
  const SimpleTrainResult r = train_simple(config, task.aux, task.images, task.labels);
  REQUIRE(r.epoch_loss.size() == 30);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
}

TEST_CASE("zero epochs returns the untouched initialization") {
  const TinyTask task = make_tiny_task(6);
  SimpleZslConfig config;
  config.d_embed = 4;
  config.epochs = 0;
  config.seed = 9;
  const SimpleTrainResult r = train_simple(config, task.aux, task.images, task.labels);
  CHECK(r.epoch_loss.empty());
  Rng rng = make_rng(9);
  const SimpleZslParams fresh = SimpleZslParams::init(4, 3, 3, rng);
  CHECK(r.params.W_x.value == fresh.W_x.value);
  CHECK(r.params.W_t.value == fresh.W_t.value);
}

TEST_CASE("training is deterministic per seed") {
  const TinyTask task = make_tiny_task(7);
  SimpleZslConfig config;
  config.d_embed = 4;
  config.epochs = 5;
  config.seed = 1234;
  const SimpleTrainResult a = train_simple(config, task.aux, task.images, task.labels);
  const SimpleTrainResult b = train_simple(config, task.aux, task.images, task.labels);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(a.params.W_x.value == b.params.W_x.value);
}

TEST_CASE("empty training set is rejected") {
  SimpleZslConfig config;
  Mat aux(2, 2);
  aux.setZero();
  Mat none(0, 2);
  CHECK_THROWS_AS(train_simple(config, aux, none, {}), DataError);
}

TEST_CASE("predict ranks by dot product with index tie-breaking") {
  SimpleZslParams p;
  p.W_x = ParamTensor("W_x", 2, 2);
  p.W_x.value << 1, 0, 0, 1;
  p.b_x = ParamTensor("b_x", 2, 1);
  p.W_t = ParamTensor("W_t", 2, 2);
  p.W_t.value << 1, 0, 0, 1;
  p.b_t = ParamTensor("b_t", 2, 1);

  SUBCASE("single candidate") {
    Mat aux(1, 2);
    aux << 1.0, 0.0;
    const auto top = predict_topk(p, (Vec(2) << 1.0, 0.0).finished(), aux, 1);
    CHECK(top == std::vector<Eigen::Index>{0});
  }
  SUBCASE("exact tie goes to the lower index") {
    Mat aux(2, 2);
    aux << 0.9, 0.0, 0.9, 0.0;  // identical candidates
    const auto top = predict_topk(p, (Vec(2) << 1.0, 0.0).finished(), aux, 2);
    CHECK(top == std::vector<Eigen::Index>{0, 1});
  }
  SUBCASE("k out of range") {
    Mat aux(2, 2);
    aux.setZero();
    CHECK_THROWS_AS(predict_topk(p, Vec::Zero(2), aux, 3), DataError);
    CHECK_THROWS_AS(predict_topk(p, Vec::Zero(2), aux, 0), DataError);
  }
}

TEST_CASE("predict agrees with a brute-force sort oracle") {
  Rng rng = make_rng(31);
  for (int iter = 0; iter < 50; ++iter) {
    const int k = 3 + iter % 5;
    SimpleZslParams p = SimpleZslParams::init(4, 3, 3, rng);
    const Mat aux = random_mat(k, 3, rng);
    const Vec x = random_mat(3, 1, rng).col(0);

    const Vec px = project(p, x, Side::kImage);
    std::vector<std::pair<double, Eigen::Index>> scored;
    for (int c = 0; c < k; ++c) {
      scored.emplace_back(px.dot(project(p, aux.row(c).transpose(), Side::kAux)), c);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });

    const auto got = predict_topk(p, x, aux, k);
    for (int c = 0; c < k; ++c) CHECK(got[c] == scored[c].second);
  }
}

TEST_CASE("ranking is invariant under positive aux scaling when b_t is zero") {
  Rng rng = make_rng(77);
  SimpleZslParams p = SimpleZslParams::init(4, 3, 3, rng);
  p.b_t.value.setZero();
  const Mat aux = random_mat(6, 3, rng);
  const Vec x = random_mat(3, 1, rng).col(0);
  const auto base = predict_topk(p, x, aux, 6);
  for (double c : {0.1, 2.0, 37.5}) {
    const Mat scaled = c * aux;
    CHECK(predict_topk(p, x, scaled, 6) == base);
  }
}

TEST_CASE("checkpoint round trip preserves predictions exactly") {
  const fs::path path = fs::temp_directory_path() /
                        ("zslforge_simple_ckpt_" + std::to_string(std::random_device{}()));
  Rng rng = make_rng(51);
  SimpleZslParams p = SimpleZslParams::init(5, 4, 3, rng);
  SimpleZslConfig config;
  config.d_embed = 5;
  config.seed = 51;
  save_simple_checkpoint(path.string(), p, config);

  auto [loaded, loaded_config] = load_simple_checkpoint(path.string());
  CHECK(loaded_config.seed == 51);
  CHECK(loaded.W_x.value == p.W_x.value);
  CHECK(loaded.b_x.value == p.b_x.value);
  CHECK(loaded.W_t.value == p.W_t.value);
  CHECK(loaded.b_t.value == p.b_t.value);

  const Mat aux = random_mat(4, 3, rng);
  const Vec x = random_mat(4, 1, rng).col(0);
  CHECK(predict_topk(loaded, x, aux, 4) == predict_topk(p, x, aux, 4));
  fs::remove(path);
}

TEST_CASE("config json round trip is strict") {
  SimpleZslConfig c;
  c.margin = 2.5;
  c.seed = 42;
  const SimpleZslConfig parsed = SimpleZslConfig::from_json(c.to_json());
  CHECK(parsed.margin == 2.5);
  CHECK(parsed.seed == 42);

  nlohmann::json bad = c.to_json();
  bad["typo_key"] = 1;
  CHECK_THROWS_AS(SimpleZslConfig::from_json(bad), ConfigError);
  nlohmann::json invalid = c.to_json();
  invalid["margin"] = -1.0;
  CHECK_THROWS_AS(SimpleZslConfig::from_json(invalid), ConfigError);
}
