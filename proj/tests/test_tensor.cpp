#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "vgcnfuse/adam.hpp"
#include "vgcnfuse/tensor.hpp"

using namespace vgcnfuse;
using testutil::check_gradients;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul identity leaves the operand unchanged") {
  TensorD eye = TensorD::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  TensorD x = TensorD::from({3, 2}, {1, 2, 3, 4, 5, 6});
  TensorD y = matmul(eye, x);
  for (long i = 0; i < 6; ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("matmul rejects mismatched inner dims") {
  TensorD a = TensorD::zeros({2, 3});
  TensorD b = TensorD::zeros({4, 2});
  CHECK_THROWS_AS(matmul(a, b), ShapeMismatch);
}

TEST_CASE("batched matmul agrees with per-slice 2d matmul") {
  Rng rng(7);
  TensorD a = TensorD::zeros({2, 3, 4});
  TensorD b = TensorD::zeros({2, 4, 5});
  for (auto& v : a.data()) v = rng.uniform(-1, 1);
  for (auto& v : b.data()) v = rng.uniform(-1, 1);
  TensorD y = matmul(a, b);
  for (long s = 0; s < 2; ++s) {
    TensorD as = TensorD::from({3, 4}, std::vector<double>(a.data().begin() + s * 12,
                                                           a.data().begin() + (s + 1) * 12));
    TensorD bs = TensorD::from({4, 5}, std::vector<double>(b.data().begin() + s * 20,
                                                           b.data().begin() + (s + 1) * 20));
    TensorD ys = matmul(as, bs);
    for (long i = 0; i < 15; ++i)
      CHECK(y.data()[s * 15 + i] == doctest::Approx(ys.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("softmax of equal scores is uniform") {
  TensorD x = TensorD::from({2}, {0, 0});
  TensorD y = softmax(x, 0);
  CHECK(y.data()[0] == doctest::Approx(0.5));
  CHECK(y.data()[1] == doctest::Approx(0.5));
}

TEST_CASE("softmax rows sum to one and are nonnegative") {
  Rng rng(3);
  TensorD x = TensorD::zeros({5, 7});
  for (auto& v : x.data()) v = rng.uniform(-30, 30);
  TensorD y = softmax(x, 1);
  for (long r = 0; r < 5; ++r) {
    double sum = 0;
    for (long c = 0; c < 7; ++c) {
      CHECK(y.at({r, c}) >= 0.0);
      sum += y.at({r, c});
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("relu backward is zero left of the kink") {
  TensorD x = TensorD::from({1}, {-1.0}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  TensorD loss = sum_all(relu(x));
  backward(loss);
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward of sum gives all-ones") {
  TensorD x = TensorD::zeros({2, 3}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  TensorD loss = sum_all(x);
  backward(loss);
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of x*x at 3 gives 6") {
  TensorD x = TensorD::from({}, {3.0}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  TensorD loss = mul(x, x);
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("backward outside recording raises NoTape") {
  TensorD x = TensorD::from({}, {3.0}, true);
  TensorD loss = mul(x, x);
  CHECK_THROWS_AS(backward(loss), NoTape);
}

TEST_CASE("broadcast add reduces gradients onto the smaller operand") {
  TensorD a = TensorD::zeros({2, 3}, true);
  TensorD b = TensorD::zeros({3}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  TensorD loss = sum_all(add(a, b));
  backward(loss);
  for (double g : a.grad()) CHECK(g == 1.0);
  for (double g : b.grad()) CHECK(g == 2.0);  // two rows fold into each bias element
}

TEST_CASE("every primitive passes a central finite-difference check") {
  Rng rng(11);
  auto randomize = [&](TensorD t) {
    for (auto& v : t.data()) v = rng.uniform(-1.5, 1.5);
    return t;
  };

  TensorD a = randomize(TensorD::zeros({3, 4}, true));
  TensorD b = randomize(TensorD::zeros({4, 5}, true));
  TensorD c = randomize(TensorD::zeros({5}, true));
  TensorD d = randomize(TensorD::zeros({3, 5}, true));

  SUBCASE("matmul + add + mul") {
    auto res = check_gradients({a, b, c, d}, [&]() {
      return sum_all(mul(add(matmul(a, b), c), d));
    });
    CHECK(res.max_rel_err < 1e-6);
  }
  SUBCASE("relu chain") {
    auto res = check_gradients({a, b}, [&]() { return sum_all(relu(matmul(a, b))); });
    CHECK(res.max_rel_err < 1e-4);
  }
  SUBCASE("gelu chain") {
    auto res = check_gradients({a, b}, [&]() { return sum_all(gelu(matmul(a, b))); });
    CHECK(res.max_rel_err < 1e-4);
  }
  SUBCASE("softmax") {
    auto res = check_gradients({d}, [&]() {
      TensorD w = softmax(d, 1);
      return sum_all(mul(w, w));
    });
    CHECK(res.max_rel_err < 1e-4);
  }
  SUBCASE("log_softmax") {
    auto res = check_gradients({d}, [&]() {
      TensorD w = log_softmax(d, 1);
      return sum_all(mul(w, d));
    });
    CHECK(res.max_rel_err < 1e-4);
  }
  SUBCASE("layer_norm") {
    auto res = check_gradients({d}, [&]() {
      TensorD y = layer_norm(d, 1e-5);
      return sum_all(mul(y, mul(y, y)));
    });
    CHECK(res.max_rel_err < 1e-4);
  }
  SUBCASE("layer_norm over a leading axis") {
    auto res = check_gradients({d}, [&]() {
      TensorD y = layer_norm(d, 0, 1e-5);
      return sum_all(mul(y, mul(y, y)));
    });
    CHECK(res.max_rel_err < 1e-4);
  }
  SUBCASE("transpose + reshape + concat + select") {
    auto res = check_gradients({a, d}, [&]() {
      TensorD at = transpose(a, {1, 0});                 // [4,3]
      TensorD dr = reshape(d, {5, 3});                   // [5,3]
      TensorD cat = concat<double>({at, dr}, 0);         // [9,3]
      return sum_all(mul(select_index(cat, 0, 2), select_index(cat, 0, 7)));
    });
    CHECK(res.max_rel_err < 1e-4);
  }
  SUBCASE("reductions") {
    auto res = check_gradients({a}, [&]() {
      TensorD s = sum_axis(a, 0);
      return sum_all(mul(s, mean_axis(a, 0)));
    });
    CHECK(res.max_rel_err < 1e-4);
  }
  SUBCASE("embedding lookup") {
    auto res = check_gradients({a}, [&]() {
      TensorD rows = embedding_lookup(a, {2, 0, 2, 1}, {4});
      return sum_all(mul(rows, rows));
    });
    CHECK(res.max_rel_err < 1e-4);
  }
  SUBCASE("nll_gather") {
    auto res = check_gradients({d}, [&]() {
      return nll_gather(log_softmax(d, 1), {1, 4, 0}, {1.0, 2.0, 0.5, 1.0, 3.0});
    });
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("dropout is the identity when off") {
  Rng rng(5);
  TensorD x = TensorD::from({4}, {1, 2, 3, 4});
  SUBCASE("eval mode") {
    TensorD y = dropout(x, 0.5, false, rng);
    CHECK(y.impl() == x.impl());
  }
  SUBCASE("p = 0") {
    TensorD y = dropout(x, 0.0, true, rng);
    CHECK(y.impl() == x.impl());
  }
}

TEST_CASE("dropout scales surviving entries by 1/(1-p)") {
  Rng rng(9);
  TensorD x = TensorD::full({1000}, 1.0);
  TensorD y = dropout(x, 0.25, true, rng);
  long kept = 0;
  for (double v : y.data()) {
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    if (v != 0.0) ++kept;
  }
  CHECK(kept > 650);
  CHECK(kept < 850);
}

TEST_CASE("layer_norm output has zero mean and unit variance pre scale/shift") {
  Rng rng(13);
  TensorD x = TensorD::zeros({6, 32});
  for (auto& v : x.data()) v = rng.uniform(-4, 9);
  TensorD y = layer_norm(x, 1e-6);
  for (long r = 0; r < 6; ++r) {
    double mean = 0, var = 0;
    for (long c = 0; c < 32; ++c) mean += y.at({r, c});
    mean /= 32;
    for (long c = 0; c < 32; ++c) var += (y.at({r, c}) - mean) * (y.at({r, c}) - mean);
    var /= 32;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("adam leaves parameters alone on zero gradients") {
  TensorD p = TensorD::from({3}, {1.0, -2.0, 0.5}, true);
  p.zero_grad();
  std::vector<TensorD> params{p};
  AdamState<double> st;
  st.lr = 0.1;
  st.init(params);
  adam_step(st, params);
  CHECK(p.data()[0] == 1.0);
  CHECK(p.data()[1] == -2.0);
  CHECK(p.data()[2] == 0.5);
}

TEST_CASE("adam first step follows the closed form") {
  // g = 1 everywhere: mhat = 1, vhat = 1, update = lr / (1 + eps)
  TensorD p = TensorD::from({2}, {0.0, 10.0}, true);
  p.grad()[0] = 1.0;
  p.grad()[1] = 1.0;
  std::vector<TensorD> params{p};
  AdamState<double> st;
  st.lr = 0.1;
  st.init(params);
  adam_step(st, params);
  double expected = 0.1 / (1.0 + 1e-8);
  CHECK(p.data()[0] == doctest::Approx(-expected).epsilon(1e-12));
  CHECK(p.data()[1] == doctest::Approx(10.0 - expected).epsilon(1e-12));
}

TEST_CASE("adam with lr = 0 freezes parameters") {
  TensorD p = TensorD::from({2}, {3.0, -1.0}, true);
  p.grad()[0] = 0.7;
  p.grad()[1] = -2.3;
  std::vector<TensorD> params{p};
  AdamState<double> st;
  st.lr = 0.0;
  st.weight_decay = 0.01;
  st.init(params);
  for (int i = 0; i < 5; ++i) adam_step(st, params);
  CHECK(p.data()[0] == 3.0);
  CHECK(p.data()[1] == -1.0);
}

TEST_CASE("adam descends a quadratic bowl") {
  TensorD p = TensorD::from({2}, {4.0, -3.0}, true);
  std::vector<TensorD> params{p};
  AdamState<double> st;
  st.lr = 0.05;
  st.init(params);
  double prev = 1e300;
  for (int step = 0; step < 10; ++step) {
    double loss = p.data()[0] * p.data()[0] + p.data()[1] * p.data()[1];
    CHECK(loss < prev);
    prev = loss;
    p.zero_grad();
    p.grad()[0] = 2 * p.data()[0];
    p.grad()[1] = 2 * p.data()[1];
    adam_step(st, params);
  }
}

TEST_CASE("decoupled weight decay shrinks parameters without touching moments") {
  TensorD p = TensorD::from({1}, {2.0}, true);
  p.zero_grad();  // zero gradient: only the decay term acts
  std::vector<TensorD> params{p};
  AdamState<double> st;
  st.lr = 0.1;
  st.weight_decay = 0.5;
  st.init(params);
  adam_step(st, params);
  CHECK(p.data()[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
}

TEST_CASE("fixed seed reproduces a training trajectory bit-for-bit") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor<float> w = Tensor<float>::uniform_init({4, 4}, 4, rng);
    Tensor<float> x = Tensor<float>::uniform_init({2, 4}, 4, rng);
    x.set_requires_grad(false);
    std::vector<Tensor<float>> params{w};
    AdamState<float> st;
    st.lr = 0.01;
    st.init(params);
    for (int step = 0; step < 5; ++step) {
      w.zero_grad();
      Tape<float> tape;
      TapeScope<float> scope(tape);
      Tensor<float> y = dropout(relu(matmul(x, w)), 0.3, true, rng);
      Tensor<float> loss = sum_all(mul(y, y));
      backward(loss);
      adam_step(st, params);
    }
    return w.data();
  };
  auto a = run(123), b = run(123), c = run(124);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_SUITE_END();
