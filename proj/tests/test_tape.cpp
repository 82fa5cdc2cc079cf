#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "nfsem/rng.hpp"
#include "nfsem/tape.hpp"

using namespace nfsem;
using ad::NodeId;
using ad::Tape;

namespace {

// Central-difference gradient of a scalar graph builder.
std::vector<double> fd_gradient(const std::function<NodeId(Tape&)>& build,
                                std::vector<double> params, double h = 1e-4) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    Tape tp(params);
    const double fp = tp.value(build(tp));
    params[i] = keep - h;
    Tape tm(params);
    const double fm = tm.value(build(tm));
    params[i] = keep;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double rel_err(double a, double b) {
  const double denom = std::fmax(std::fmax(std::fabs(a), std::fabs(b)), 1e-8);
  return std::fabs(a - b) / denom;
}

void check_gradients(const std::function<NodeId(Tape&)>& build, std::vector<double> params,
                     double tol = 1e-4) {
  std::vector<double> grads(params.size());
  ad::forward_backward(build, params, grads);
  const std::vector<double> fd = fd_gradient(build, params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    INFO("parameter ", i);
    CHECK(rel_err(grads[i], fd[i]) < tol);
  }
}

}  // namespace

TEST_CASE("loss p^2 at p=3 gives value 9 and gradient 6") {
  std::vector<double> params{3.0};
  std::vector<double> grads(1);
  const double loss =
      ad::forward_backward([](Tape& t) { return t.powc(t.leaf(0), 2.0); }, params, grads);
  CHECK(loss == doctest::Approx(9.0));
  CHECK(grads[0] == doctest::Approx(6.0));
}

TEST_CASE("loss independent of a parameter leaves its gradient zero") {
  std::vector<double> params{3.0, 4.0};
  std::vector<double> grads(2);
  ad::forward_backward([](Tape& t) { return t.mul(t.leaf(0), t.leaf(0)); }, params, grads);
  CHECK(grads[1] == 0.0);
}

TEST_CASE("non-finite values abort with the offending node named") {
  std::vector<double> params{0.0};
  std::vector<double> grads(1);
  CHECK_THROWS_AS(
      ad::forward_backward([](Tape& t) { return t.div(t.constant(1.0), t.leaf(0)); }, params,
                           grads),
      std::runtime_error);
}

TEST_CASE("every scalar primitive matches central finite differences at random points") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    // Random points away from the non-differentiable loci of each primitive.
    const double a = rng.uniform(0.15, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const double b = rng.uniform(0.15, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    std::vector<double> p{a, b};
    check_gradients([](Tape& t) { return t.add(t.leaf(0), t.leaf(1)); }, p);
    check_gradients([](Tape& t) { return t.sub(t.leaf(0), t.leaf(1)); }, p);
    check_gradients([](Tape& t) { return t.mul(t.leaf(0), t.leaf(1)); }, p);
    check_gradients([](Tape& t) { return t.div(t.leaf(0), t.leaf(1)); }, p);
    check_gradients([](Tape& t) { return t.neg(t.leaf(0)); }, p);
    check_gradients([](Tape& t) { return t.addc(t.leaf(0), 0.7); }, p);
    check_gradients([](Tape& t) { return t.mulc(t.leaf(0), -1.3); }, p);
    check_gradients([](Tape& t) { return t.sin(t.leaf(0)); }, p);
    check_gradients([](Tape& t) { return t.cos(t.leaf(0)); }, p);
    check_gradients([](Tape& t) { return t.exp(t.leaf(0)); }, p);
    check_gradients([](Tape& t) { return t.sigmoid(t.leaf(0)); }, p);
    check_gradients([](Tape& t) { return t.atan2(t.leaf(0), t.leaf(1)); }, p);
    check_gradients([](Tape& t) { return t.relu(t.leaf(0)); }, p);
    check_gradients([](Tape& t) { return t.abs(t.leaf(0)); }, p);
    if (std::fabs(std::fabs(a) - std::fabs(b)) > 1e-3) {
      check_gradients([](Tape& t) { return t.min(t.leaf(0), t.leaf(1)); }, p);
      check_gradients([](Tape& t) { return t.max(t.leaf(0), t.leaf(1)); }, p);
    }
    std::vector<double> pos{std::fabs(a) + 0.1, std::fabs(b) + 0.1};
    check_gradients([](Tape& t) { return t.sqrt(t.leaf(0)); }, pos);
    check_gradients([](Tape& t) { return t.powc(t.leaf(0), 3.0); }, pos);
    std::vector<double> inner{rng.uniform(-0.9, 0.9)};
    check_gradients([](Tape& t) { return t.arccos(t.leaf(0)); }, inner);
  }
}

TEST_CASE("range primitives match finite differences") {
  Rng rng(7);
  std::vector<double> p(8);
  for (auto& v : p) v = rng.uniform(-1.0, 1.0);

  auto dot_graph = [](Tape& t) {
    const NodeId first = t.leaf(0);
    for (std::uint32_t i = 1; i < 8; ++i) t.leaf(i);
    return t.dot(first, 2, first + 1, 2, 4);  // strided halves
  };
  check_gradients(dot_graph, p);

  auto dotc_graph = [](Tape& t) {
    std::array<NodeId, 4> ids{t.leaf(0), t.leaf(2), t.leaf(4), t.leaf(6)};
    const std::array<double, 4> w{0.5, -1.5, 2.0, 0.25};
    return t.dotc(ids, w);
  };
  check_gradients(dotc_graph, p);

  auto sum_graph = [](Tape& t) {
    const NodeId first = t.leaf(0);
    for (std::uint32_t i = 1; i < 8; ++i) t.leaf(i);
    return t.sum(first, 1, 8);
  };
  check_gradients(sum_graph, p);

  auto norm_graph = [](Tape& t) {
    const NodeId first = t.leaf(0);
    for (std::uint32_t i = 1; i < 8; ++i) t.leaf(i);
    return t.norm(first, 1, 8);
  };
  check_gradients(norm_graph, p);

  auto fused_graph = [](Tape& t) {
    const NodeId first = t.leaf(0);
    for (std::uint32_t i = 1; i < 8; ++i) t.leaf(i);
    const NodeId act = t.relu_dot_bias(first, first + 3, 3, first + 7);
    return t.add(act, t.mask_mul(first + 1, act));
  };
  check_gradients(fused_graph, p, 2e-4);
}

TEST_CASE("fused ops equal their primitive compositions") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(7);
    for (auto& v : p) v = rng.uniform(-1.0, 1.0);
    Tape t(p);
    std::array<NodeId, 7> x;
    for (std::uint32_t i = 0; i < 7; ++i) x[i] = t.leaf(i);
    const NodeId fused = t.relu_dot_bias(x[0], x[3], 3, x[6]);
    const NodeId plain = t.relu(t.add(t.dot(x[0], 1, x[3], 1, 3), x[6]));
    CHECK(t.value(fused) == t.value(plain));
    const NodeId fused_m = t.mask_mul(x[1], fused);
    const NodeId plain_m = t.mul(x[1], t.step(plain));
    CHECK(t.value(fused_m) == t.value(plain_m));
  }
}

TEST_CASE("norm gradient is guarded at zero") {
  std::vector<double> p{0.0, 0.0, 0.0};
  std::vector<double> grads(3);
  ad::forward_backward(
      [](Tape& t) {
        const NodeId first = t.leaf(0);
        t.leaf(1);
        t.leaf(2);
        return t.norm(first, 1, 3);
      },
      p, grads);
  CHECK(grads[0] == 0.0);
  CHECK(grads[1] == 0.0);
  CHECK(grads[2] == 0.0);
}

TEST_CASE("ten-parameter composite of field primitives matches finite differences") {
  Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> p(10);
    for (auto& v : p) v = rng.uniform(-1.0, 1.0);
    auto build = [](Tape& t) {
      std::array<NodeId, 10> x;
      for (std::uint32_t i = 0; i < 10; ++i) x[i] = t.leaf(i);
      const NodeId s1 = t.sigmoid(t.mul(x[0], x[1]));
      const NodeId s2 = t.exp(t.mulc(x[2], 0.3));
      const NodeId s3 = t.sin(t.add(x[3], x[4]));
      const NodeId s4 = t.sqrt(t.addc(t.mul(x[5], x[5]), 0.2));
      const NodeId s5 = t.atan2(x[6], t.addc(t.abs(x[7]), 1.0));
      const NodeId c0 = t.addc(s1, 0.0);
      t.addc(s2, 0.0);
      t.addc(s3, 0.0);
      t.addc(s4, 0.0);
      t.addc(s5, 0.0);
      const NodeId nrm = t.norm(c0, 1, 5);
      const NodeId mix = t.mul(nrm, t.sigmoid(x[8]));
      return t.add(mix, t.powc(x[9], 2.0));
    };
    check_gradients(build, p);
  }
}

TEST_CASE("backward of a sum equals the sum of backwards") {
  Rng rng(123);
  std::vector<double> p(6);
  for (auto& v : p) v = rng.uniform(-1.0, 1.0);
  auto f = [](Tape& t) { return t.sin(t.mul(t.leaf(0), t.leaf(1))); };
  auto g = [](Tape& t) { return t.exp(t.mulc(t.add(t.leaf(2), t.leaf(4)), 0.5)); };
  auto fg = [&](Tape& t) { return t.add(f(t), g(t)); };

  std::vector<double> gf(p.size()), gg(p.size()), gfg(p.size());
  ad::forward_backward(f, p, gf);
  ad::forward_backward(g, p, gg);
  ad::forward_backward(fg, p, gfg);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(gfg[i] == doctest::Approx(gf[i] + gg[i]).epsilon(1e-12));
}

TEST_CASE("multi-seed backward matches a weighted sum node") {
  Rng rng(55);
  std::vector<double> p(4);
  for (auto& v : p) v = rng.uniform(-1.0, 1.0);

  Tape t(p);
  const NodeId u = t.sin(t.mul(t.leaf(0), t.leaf(1)));
  const NodeId v = t.exp(t.add(t.leaf(2), t.leaf(3)));
  const std::array<std::pair<NodeId, double>, 2> seeds{{{u, 0.25}, {v, -2.0}}};
  t.backward_multi(seeds);
  std::array<double, 4> got{};
  for (int i = 0; i < 4; ++i) got[i] = t.adjoint(t.leaf(i));

  Tape t2(p);
  const NodeId u2 = t2.sin(t2.mul(t2.leaf(0), t2.leaf(1)));
  const NodeId v2 = t2.exp(t2.add(t2.leaf(2), t2.leaf(3)));
  const NodeId combined = t2.add(t2.mulc(u2, 0.25), t2.mulc(v2, -2.0));
  t2.backward(combined);
  for (int i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(t2.adjoint(t2.leaf(i))));
}

TEST_CASE("identical inputs give bit-identical gradients") {
  Rng rng(5);
  std::vector<double> p(10);
  for (auto& v : p) v = rng.uniform(-1.0, 1.0);
  auto build = [](Tape& t) {
    NodeId acc = t.leaf(0);
    for (std::uint32_t i = 1; i < 10; ++i) acc = t.sigmoid(t.add(acc, t.leaf(i)));
    return acc;
  };
  std::vector<double> g1(p.size()), g2(p.size());
  const double l1 = ad::forward_backward(build, p, g1);
  const double l2 = ad::forward_backward(build, p, g2);
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("leaf dedup returns one node per parameter") {
  std::vector<double> p{2.0};
  Tape t(p);
  const NodeId a = t.leaf(0);
  const NodeId b = t.leaf(0);
  CHECK(a == b);
  const NodeId y = t.mul(a, b);
  t.backward(y);
  CHECK(t.adjoint(a) == doctest::Approx(4.0));  // d(x*x)/dx = 2x
}

TEST_CASE("tape reset reuses storage and clears leaves") {
  std::vector<double> p{1.0, 2.0};
  Tape t(p);
  t.mul(t.leaf(0), t.leaf(1));
  CHECK(t.size() == 3);
  t.reset();
  CHECK(t.size() == 0);
  const NodeId a = t.leaf(1);
  CHECK(t.value(a) == 2.0);
  CHECK(t.leaves().size() == 1);
}

TEST_CASE("arccos input is clamped near the boundary") {
  std::vector<double> p{1.0 + 1e-9};
  Tape t(p);
  const NodeId y = t.arccos(t.leaf(0));
  CHECK(std::isfinite(t.value(y)));
  t.backward(y);
  CHECK(std::isfinite(t.adjoint(t.leaf(0))));
}

TEST_CASE("min and max are left-biased on ties") {
  std::vector<double> p{1.0, 1.0};
  Tape t(p);
  const NodeId m = t.min(t.leaf(0), t.leaf(1));
  t.backward(m);
  CHECK(t.adjoint(t.leaf(0)) == 1.0);
  CHECK(t.adjoint(t.leaf(1)) == 0.0);

  Tape t2(p);
  const NodeId mx = t2.max(t2.leaf(0), t2.leaf(1));
  t2.backward(mx);
  CHECK(t2.adjoint(t2.leaf(0)) == 1.0);
  CHECK(t2.adjoint(t2.leaf(1)) == 0.0);
}

TEST_CASE("abs has zero subgradient at zero") {
  std::vector<double> p{0.0};
  Tape t(p);
  const NodeId y = t.abs(t.leaf(0));
  t.backward(y);
  CHECK(t.adjoint(t.leaf(0)) == 0.0);
}
