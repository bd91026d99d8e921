#include <cmath>
#include <cstdlib>

#include "cacdn/foundation.hpp"
#include "cacdn/fusion.hpp"
#include "cacdn/nn.hpp"
#include "doctest.h"

using namespace cacdn;
using D = TensorT<double>;

namespace {

D random_tensor(std::vector<int> shape, uint64_t seed, double lo = -1.0,
                double hi = 1.0) {
  D t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Projects an output tensor to a scalar with fixed random weights so a single
// backward pass covers every output element.
struct ScalarProbe {
  D weights;
  explicit ScalarProbe(const std::vector<int>& shape, uint64_t seed = 7)
      : weights(random_tensor(shape, seed)) {}
  double value(const D& y) const {
    double s = 0.0;
    for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * weights.data[i];
    return s;
  }
  D grad() const { return weights; }
};

// Central finite differences on selected entries of x against analytic gx.
template <class Forward>
void check_input_grad(Forward fwd, D& x, const D& gx, double h = 1e-5,
                      double tol = 1e-6) {
  Rng pick(99);
  for (int trial = 0; trial < 12; ++trial) {
    size_t i = static_cast<size_t>(pick.uniform_int(static_cast<int>(x.data.size())));
    const double orig = x.data[i];
    x.data[i] = orig + h;
    const double up = fwd();
    x.data[i] = orig - h;
    const double dn = fwd();
    x.data[i] = orig;
    const double num = (up - dn) / (2.0 * h);
    const double ana = gx.data[i];
    const double scale = std::max({1.0, std::abs(num), std::abs(ana)});
    CHECK(std::abs(num - ana) / scale < tol);
  }
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
  struct Case {
    int in_c, out_c, k, stride, pad, h, w;
  };
  for (const Case c : {Case{3, 4, 3, 1, 1, 6, 6}, Case{2, 5, 3, 2, 1, 8, 8},
                       Case{4, 3, 1, 1, 0, 5, 5}, Case{2, 4, 1, 2, 0, 6, 6},
                       Case{1, 2, 7, 2, 3, 9, 9}}) {
    nn::Conv2d<double> conv("c", c.in_c, c.out_c, c.k, c.stride, c.pad);
    conv.init_params(11);
    D x = random_tensor({2, c.in_c, c.h, c.w}, 21);
    D y0 = conv.forward(x);
    ScalarProbe probe(y0.shape);
    auto fwd = [&]() { return probe.value(conv.forward(x)); };
    conv.forward(x);
    D gx = conv.backward(probe.grad());
    check_input_grad(fwd, x, gx);

    // weight + bias gradients
    nn::Collector<double> col;
    conv.collect(col);
    for (auto& p : col.params) {
      p.grad->fill(0.0);
      conv.forward(x);
      conv.backward(probe.grad());
      Rng pick(5);
      for (int t = 0; t < 6; ++t) {
        size_t i = static_cast<size_t>(
            pick.uniform_int(static_cast<int>(p.value->data.size())));
        const double orig = p.value->data[i];
        const double h = 1e-5;
        p.value->data[i] = orig + h;
        const double up = fwd();
        p.value->data[i] = orig - h;
        const double dn = fwd();
        p.value->data[i] = orig;
        const double num = (up - dn) / (2.0 * h);
        const double ana = p.grad->data[i];
        const double scale = std::max({1.0, std::abs(num), std::abs(ana)});
        CHECK(std::abs(num - ana) / scale < 1e-6);
      }
    }
  }
}

TEST_CASE("batchnorm train-mode gradients match finite differences") {
  nn::BatchNorm2d<double> bn("bn", 3);
  D x = random_tensor({2, 3, 4, 4}, 31);
  // non-trivial affine parameters
  nn::Collector<double> col;
  bn.collect(col);
  Rng rng(41);
  for (auto& p : col.params)
    for (auto& v : p.value->data) v = rng.uniform(0.5, 1.5);

  D y0 = bn.forward(x, true);
  ScalarProbe probe(y0.shape);
  auto fwd = [&]() { return probe.value(bn.forward(x, true)); };
  bn.forward(x, true);
  D gx = bn.backward(probe.grad());
  check_input_grad(fwd, x, gx, 1e-5, 1e-5);

  for (auto& p : col.params) {
    p.grad->fill(0.0);
    bn.forward(x, true);
    bn.backward(probe.grad());
    for (size_t i = 0; i < p.value->data.size(); ++i) {
      const double orig = p.value->data[i];
      const double h = 1e-5;
      p.value->data[i] = orig + h;
      const double up = fwd();
      p.value->data[i] = orig - h;
      const double dn = fwd();
      p.value->data[i] = orig;
      const double num = (up - dn) / (2.0 * h);
      CHECK(std::abs(num - p.grad->data[i]) /
                std::max(1.0, std::abs(num)) < 1e-6);
    }
  }
}

TEST_CASE("pointwise and resampling layers backpropagate exactly") {
  D x = random_tensor({2, 3, 4, 4}, 51);

  nn::ReLU<double> relu;
  D y = relu.forward(x);
  ScalarProbe probe(y.shape);
  auto fwd_relu = [&]() { return probe.value(relu.forward(x)); };
  relu.forward(x);
  D gx = relu.backward(probe.grad());
  check_input_grad(fwd_relu, x, gx);

  nn::Sigmoid<double> sig;
  auto fwd_sig = [&]() { return probe.value(sig.forward(x)); };
  sig.forward(x);
  gx = sig.backward(probe.grad());
  check_input_grad(fwd_sig, x, gx);

  nn::UpsampleNearest2x<double> up;
  D yu = up.forward(x);
  ScalarProbe probe_u(yu.shape);
  auto fwd_up = [&]() { return probe_u.value(up.forward(x)); };
  up.forward(x);
  gx = up.backward(probe_u.grad());
  check_input_grad(fwd_up, x, gx);

  nn::ResizeNearest<double> rz;
  D yr = rz.forward(x, 2, 2);
  ScalarProbe probe_r(yr.shape);
  auto fwd_rz = [&]() { return probe_r.value(rz.forward(x, 2, 2)); };
  rz.forward(x, 2, 2);
  gx = rz.backward(probe_r.grad());
  check_input_grad(fwd_rz, x, gx);
}

TEST_CASE("bottleneck and fusion block gradients match finite differences") {
  BottleneckBlock<double> block("b", 4, 8, 2);
  block.init_params(61);
  D x = random_tensor({2, 4, 8, 8}, 71);
  D y0 = block.forward(x, true);
  ScalarProbe probe(y0.shape);
  auto fwd = [&]() { return probe.value(block.forward(x, true)); };
  block.forward(x, true);
  D gx = block.backward(probe.grad());
  check_input_grad(fwd, x, gx, 1e-5, 1e-5);

  ResidualFusionBlock<double> fb("f", 5, {3, 4}, 6, 4);
  fb.init_params(81);
  // move the zero-initialized scale off zero so the context path is live
  nn::Collector<double> col;
  fb.collect(col);
  Rng rng(91);
  for (auto& p : col.params)
    if (p.name.find("ctx_bn2.gamma") != std::string::npos)
      for (auto& v : p.value->data) v = rng.uniform(0.5, 1.0);

  D main = random_tensor({2, 5, 4, 4}, 101);
  D c1 = random_tensor({2, 3, 4, 4}, 102);
  D c2 = random_tensor({2, 4, 4, 4}, 103);
  D f0 = fb.forward(main, {&c1, &c2}, true);
  ScalarProbe probe_f(f0.shape);
  auto fwd_f = [&]() { return probe_f.value(fb.forward(main, {&c1, &c2}, true)); };
  fb.forward(main, {&c1, &c2}, true);
  auto grads = fb.backward(probe_f.grad());
  check_input_grad(fwd_f, main, grads.main, 1e-5, 1e-5);
  check_input_grad(fwd_f, c1, grads.context[0], 1e-5, 1e-5);
  check_input_grad(fwd_f, c2, grads.context[1], 1e-5, 1e-5);
}

TEST_CASE("results are independent of the worker count") {
  nn::Conv2d<float> conv("c", 3, 8, 3, 1, 1);
  conv.init_params(1);
  Tensor x = random_tensor({4, 3, 16, 16}, 5).cast<float>();

  setenv("CACDN_NUM_WORKERS", "1", 1);
  Tensor y1 = conv.forward(x);
  Tensor g1 = conv.backward(y1);
  setenv("CACDN_NUM_WORKERS", "3", 1);
  Tensor y3 = conv.forward(x);
  Tensor g3 = conv.backward(y3);
  unsetenv("CACDN_NUM_WORKERS");

  CHECK(y1.data == y3.data);
  CHECK(g1.data == g3.data);
}
