#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "zslforge/numeric.hpp"

#include <cmath>

using namespace zslforge;

TEST_CASE("xavier init stays within the bound") {
  ParamTensor p = init_linear("w", 1, 1, std::uint64_t{7});
  CHECK(std::abs(p.value(0, 0)) <= std::sqrt(3.0));

  ParamTensor big = init_linear("w", 64, 32, std::uint64_t{7});
  const double bound = std::sqrt(6.0 / (64 + 32));
  CHECK(big.value.maxCoeff() <= bound);
  CHECK(big.value.minCoeff() >= -bound);
}

TEST_CASE("bias starts at zero") {
  ParamTensor b = init_bias("b", 4);
  CHECK(b.value.rows() == 4);
  CHECK(b.value.cols() == 1);
  CHECK(b.value.isZero(0.0));
}

TEST_CASE("init is deterministic per seed") {
  ParamTensor a = init_linear("w", 5, 3, std::uint64_t{42});
  ParamTensor b = init_linear("w", 5, 3, std::uint64_t{42});
  CHECK(a.value == b.value);
  ParamTensor c = init_linear("w", 5, 3, std::uint64_t{43});
  CHECK(a.value != c.value);
}

TEST_CASE("adam with zero gradients is the identity") {
  ParamTensor p("p", 3, 2);
  p.value.setRandom();
  const Mat before = p.value;
  std::vector<ParamTensor*> params = {&p};
  AdamOptimizer opt({}, params);
  for (int t = 0; t < 10; ++t) {
    p.zero_grad();
    opt.step(params);
  }
  CHECK(p.value == before);
}

TEST_CASE("adam first step matches the hand computation") {
  ParamTensor p("p", 1, 1);
  p.value(0, 0) = 0.0;
  p.grad(0, 0) = 1.0;
  std::vector<ParamTensor*> params = {&p};
  AdamHyper hyper;  // lr 1e-3, beta1 0.9, beta2 0.999, eps 1e-8
  AdamOptimizer opt(hyper, params);
  opt.step(params);
  // m_hat = 1, v_hat = 1 at t=1, so the update is -lr / (1 + eps).
  CHECK(p.value(0, 0) == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("amsgrad denominator never shrinks") {
  // A large gradient followed by tiny ones: plain Adam's denominator decays,
  // AMSGrad's max-tracked one must not, so its later steps are smaller.
  auto run = [](bool amsgrad) {
    ParamTensor p("p", 1, 1);
    p.value(0, 0) = 0.0;
    std::vector<ParamTensor*> params = {&p};
    AdamHyper hyper;
    hyper.amsgrad = amsgrad;
    AdamOptimizer opt(hyper, params);
    p.grad(0, 0) = 10.0;
    opt.step(params);
    std::vector<double> deltas;
    for (int t = 0; t < 20; ++t) {
      const double before = p.value(0, 0);
      p.grad(0, 0) = 1e-4;
      opt.step(params);
      deltas.push_back(std::abs(p.value(0, 0) - before));
    }
    return deltas;
  };
  const auto adam = run(false);
  const auto ams = run(true);
  for (std::size_t i = 0; i < adam.size(); ++i) CHECK(ams[i] <= adam[i] + 1e-15);
}

TEST_CASE("non-finite gradient aborts with the parameter name") {
  ParamTensor p("theta", 1, 1);
  p.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  std::vector<ParamTensor*> params = {&p};
  AdamOptimizer opt({}, params);
  CHECK_THROWS_WITH_AS(opt.step(params),
                       "optimizer_step: non-finite gradient in parameter 'theta'", DataError);
}

TEST_CASE("warmup schedule endpoints and midpoint") {
  const WarmupSchedule beta(2.5, 0, 93);
  CHECK(beta.weight(0) == 0.0);
  CHECK(beta.weight(93) == 2.5);
  CHECK(beta.weight(200) == 2.5);

  const WarmupSchedule cross(1.0, 21, 75);
  CHECK(cross.weight(21) == 0.0);
  CHECK(cross.weight(75) == 1.0);

  const WarmupSchedule da(4.0, 6, 22);
  CHECK(da.weight(14) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(da.weight(0) == 0.0);
}

TEST_CASE("warmup weight is monotone and clamped") {
  const WarmupSchedule s(3.0, 5, 17);
  double prev = -1.0;
  for (int e = 0; e < 40; ++e) {
    const double w = s.weight(e);
    CHECK(w >= prev);
    CHECK(w >= 0.0);
    CHECK(w <= 3.0);
    prev = w;
  }
}

TEST_CASE("invalid schedule is rejected") {
  CHECK_THROWS_AS(WarmupSchedule(1.0, 10, 10), ConfigError);
  CHECK_THROWS_AS(WarmupSchedule(-1.0, 0, 10), ConfigError);
}

TEST_CASE("finite differences recover simple derivatives") {
  ParamTensor theta("t", 1, 1);

  SUBCASE("quadratic") {
    theta.value(0, 0) = 3.0;
    std::vector<ParamTensor*> params = {&theta};
    auto grads = finite_diff_grad(
        [&] { return theta.value(0, 0) * theta.value(0, 0); }, params);
    CHECK(grads[0](0, 0) == doctest::Approx(6.0).epsilon(1e-6));
  }

  SUBCASE("constant") {
    theta.value(0, 0) = 1.7;
    std::vector<ParamTensor*> params = {&theta};
    auto grads = finite_diff_grad([&] { return 42.0; }, params);
    CHECK(grads[0](0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  }

  SUBCASE("absolute value away from the kink") {
    theta.value(0, 0) = 1.0;
    std::vector<ParamTensor*> params = {&theta};
    auto grads = finite_diff_grad([&] { return std::abs(theta.value(0, 0)); }, params);
    CHECK(grads[0](0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  }
}
