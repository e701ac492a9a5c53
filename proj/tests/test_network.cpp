#include <doctest.h>

#include <random>

#include "pertl/errors.hpp"
#include "pertl/network.hpp"
#include "pertl/reduction.hpp"

using namespace pertl;

namespace {

TrunkSpec small_spec() {
  TrunkSpec spec;
  spec.hidden_widths = {8, 10, 12};
  spec.m = 2;
  spec.h = 6;
  return spec;
}

LossBatch small_batch(const TrunkSpec& spec, int heads) {
  LossBatch batch;
  batch.t = {0.3, 1.1, 2.0, 3.7, 4.4};
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < heads; ++k) {
    auto sys = build_system(std::vector<double>{1.0 + k, 0.5, 1.0});
    sys.u_star = Eigen::Vector2d(u(rng), u(rng));
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(spec.m, batch.t.size());
    for (std::size_t i = 0; i < batch.t.size(); ++i) F(spec.m - 1, i) = std::cos(batch.t[i] * (k + 1));
    batch.systems.push_back(sys);
    batch.forcing.push_back(F);
  }
  return batch;
}

}  // namespace

TEST_CASE("head_loss hand example") {
  TrunkEval col{Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd(2, 2)};
  col.H_dot << 0.0, 1.0, 1.0, 0.0;
  TrunkEval boundary{Eigen::MatrixXd(2, 2), Eigen::MatrixXd::Zero(2, 2)};
  boundary.H << 1.0, 1.0, 0.0, 1.0;
  FirstOrderSystem sys;
  sys.A.resize(2, 2);
  sys.A << 0.0, -1.0, 2.0, 3.0;
  sys.B = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd F(2, 1);
  F << 0.0, 5.0;
  const std::vector<TrunkEval> cols{col};
  CHECK(head_loss(sys, cols, boundary, Eigen::Vector2d(1.0, 2.0), F, Eigen::Vector2d(1.0, 1.0)) ==
        doctest::Approx(10.5).epsilon(1e-15));
}

TEST_CASE("zero trunk gives loss equal to forcing and boundary energy") {
  TrunkSpec spec = small_spec();
  const auto params = TrunkParams::zeros(spec);
  const auto evals = trunk_forward(params, std::vector<double>{0.5, 1.5});
  for (const auto& e : evals) {
    CHECK(e.H.isZero());
    CHECK(e.H_dot.isZero());
  }
  const auto boundary = trunk_forward(params, std::vector<double>{0.0});
  auto sys = build_system(std::vector<double>{1.0, 1.0, 1.0});
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(2, 2);
  F(1, 0) = 2.0;
  F(1, 1) = 2.0;
  const Eigen::Vector2d u_star(1.0, 3.0);
  CHECK(head_loss(sys, evals, boundary[0], Eigen::VectorXd::Ones(6), F, u_star) ==
        doctest::Approx(8.0 / 4.0 + 10.0 / 2.0));
}

TEST_CASE("shapes and reshape convention") {
  const auto spec = small_spec();
  const auto params = TrunkParams::init(spec, 1);
  CHECK(params.weights.size() == 3);
  CHECK(params.weights[0].rows() == 8);
  CHECK(params.weights[0].cols() == 1);
  CHECK(params.weights[2].rows() == 12);
  CHECK(params.weights[2].cols() == 10);
  CHECK(params.parameter_count() == (8 + 8) + (80 + 10) + (120 + 12));
  const std::vector<double> t{0.4, 2.2};
  const auto batch = trunk_batch(params, t);
  CHECK(batch.value.rows() == 12);
  CHECK(batch.value.cols() == 2);
  const auto e = batch.at(1, 2, 6);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 6; ++c) CHECK(e.H(r, c) == batch.value(r * 6 + c, 1));
  const auto direct = trunk_forward(params, t);
  CHECK(direct[1].H == e.H);
  CHECK(direct[1].H_dot == e.H_dot);
}

TEST_CASE("initialisation is seeded and bounded") {
  const auto spec = small_spec();
  const auto a = TrunkParams::init(spec, 42);
  const auto b = TrunkParams::init(spec, 42);
  const auto c = TrunkParams::init(spec, 43);
  CHECK(a.weights[1] == b.weights[1]);
  CHECK(a.weights[1] != c.weights[1]);
  CHECK(a.weights[1].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
  const auto heads = init_heads(spec, 3, 42);
  CHECK(heads.size() == 3);
  for (const auto& w : heads) CHECK(w.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(6.0));
}

TEST_CASE("H_dot agrees with central differences") {
  const auto spec = small_spec();
  const auto params = TrunkParams::init(spec, 5);
  const double step = 1e-5;
  for (double t : {0.0, 0.8, 2.5, 4.9}) {
    const auto mid = trunk_forward(params, std::vector<double>{t});
    const auto hi = trunk_forward(params, std::vector<double>{t + step});
    const auto lo = trunk_forward(params, std::vector<double>{t - step});
    const Eigen::MatrixXd fd = (hi[0].H - lo[0].H) / (2.0 * step);
    CHECK((fd - mid[0].H_dot).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("loss gradient agrees with central differences") {
  const auto spec = small_spec();
  auto params = TrunkParams::init(spec, 11);
  auto heads = init_heads(spec, 3, 11);
  const auto batch = small_batch(spec, 3);
  const auto grad = loss_gradient(params, heads, batch);
  CHECK(grad.total == doctest::Approx(batch_loss(params, heads, batch)).epsilon(1e-13));
  const Eigen::VectorXd analytic = flatten(grad.d_trunk, grad.d_heads);
  const Eigen::VectorXd x = flatten(params, heads);
  REQUIRE(analytic.size() == x.size());
  auto f = [&](const Eigen::VectorXd& flat) {
    TrunkParams p = params;
    std::vector<HeadWeights> h = heads;
    unflatten(flat, p, h);
    return batch_loss(p, h, batch);
  };
  const double step = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    const double fd = (f(xp) - f(xm)) / (2.0 * step);
    worst = std::max(worst, std::abs(fd - analytic[i]) / std::max(1.0, std::abs(fd)));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("flatten and unflatten round trip") {
  const auto spec = small_spec();
  const auto params = TrunkParams::init(spec, 3);
  const auto heads = init_heads(spec, 2, 3);
  const Eigen::VectorXd flat = flatten(params, heads);
  CHECK(flat.size() == static_cast<Eigen::Index>(params.parameter_count() + 12));
  TrunkParams p2 = TrunkParams::zeros(spec);
  std::vector<HeadWeights> h2(2, HeadWeights::Zero(6));
  unflatten(flat, p2, h2);
  CHECK(flatten(p2, h2) == flat);
  CHECK(p2.weights[2] == params.weights[2]);
}

TEST_CASE("head_loss is a quadratic in W") {
  const auto spec = small_spec();
  const auto params = TrunkParams::init(spec, 2);
  const auto batch = small_batch(spec, 1);
  const auto cols = trunk_forward(params, batch.t);
  const auto b = trunk_forward(params, std::vector<double>{0.0});
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  Eigen::VectorXd W0(6), dW(6);
  for (int i = 0; i < 6; ++i) {
    W0[i] = nd(rng);
    dW[i] = nd(rng);
  }
  auto L = [&](double s) {
    return head_loss(batch.systems[0], cols, b[0], W0 + s * dW, batch.forcing[0], batch.systems[0].u_star);
  };
  // Third finite difference of a quadratic vanishes.
  const double third = L(3.0) - 3.0 * L(2.0) + 3.0 * L(1.0) - L(0.0);
  CHECK(std::abs(third) <= 1e-9 * (1.0 + std::abs(L(3.0))));
}

TEST_CASE("non-finite activations are reported") {
  const auto spec = small_spec();
  auto params = TrunkParams::init(spec, 1);
  params.weights[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(trunk_forward(params, std::vector<double>{1.0}), NumericalError);
}

TEST_CASE("trunk shape validation") {
  TrunkSpec spec = small_spec();
  spec.hidden_widths.back() = 11;
  CHECK_THROWS(spec.validate());
}
