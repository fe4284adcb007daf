#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "ascore/error.hpp"
#include "ascore/numerics/adam.hpp"
#include "ascore/numerics/checkpoint.hpp"
#include "ascore/numerics/ops.hpp"
#include "ascore/numerics/parameters.hpp"
#include "support/gradcheck.hpp"

using namespace ascore;
using namespace ascore::numerics;
using ascore::testing::gradcheck;
using ascore::testing::probe;
using ascore::testing::random_tensor;

TEST_CASE("tensor construction validates shape") {
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), ShapeError);
  Tensor t = Tensor::full({2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.dim(1) == 3);
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("conv2d identity kernel returns the input") {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor({1, 4, 5}, rng, false);
  Tensor w = Tensor::full({1, 1, 1, 1}, 1.0);
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, w, b, 1, 0);
  REQUIRE(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("conv2d sums a 3x3 window of ones") {
  Tensor x = Tensor::full({1, 3, 3}, 1.0);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor y = conv2d(x, w, Tensor::zeros({1}), 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 1});
  CHECK(y.item() == 9.0);
}

TEST_CASE("conv2d output size follows the stride/padding formula") {
  Tensor x = Tensor::zeros({2, 9, 7});
  Tensor w = Tensor::zeros({3, 2, 3, 3});
  Tensor y = conv2d(x, w, Tensor::zeros({3}), 2, 1);
  CHECK(y.shape() == Shape{3, 5, 4});
  CHECK_THROWS_AS(conv2d(x, Tensor::zeros({3, 4, 3, 3}), Tensor::zeros({3}), 1, 1), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor::zeros({3, 2, 2, 2}), Tensor::zeros({3}), 1, 1), ShapeError);
}

TEST_CASE("conv2d gradient matches finite differences") {
  for (std::uint64_t seed : {3u, 4u}) {
    std::mt19937_64 rng(seed);
    Tensor x = random_tensor({2, 5, 5}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    for (std::size_t stride : {1u, 2u}) {
      const Shape out{3, (5 + 2 - 3) / stride + 1, (5 + 2 - 3) / stride + 1};
      Tensor probe_w = random_tensor(out, rng, false);
      auto r = gradcheck([&] { return probe(conv2d(x, w, b, stride, 1), probe_w); }, {x, w, b});
      CHECK(r.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("softmax of a uniform vector is uniform") {
  Tensor y = softmax(Tensor::full({4}, 0.3), 0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(softmax(Tensor::full({4}, 0.3), 1), ShapeError);
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor({5, 7}, rng, false, -30.0, 30.0);
  for (std::size_t axis : {0u, 1u}) {
    Tensor y = softmax(x, axis);
    const std::size_t outer = axis == 0 ? 7 : 5;
    const std::size_t extent = axis == 0 ? 5 : 7;
    for (std::size_t o = 0; o < outer; ++o) {
      double total = 0.0;
      for (std::size_t e = 0; e < extent; ++e) {
        const double v = axis == 0 ? y[e * 7 + o] : y[o * 7 + e];
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("relu clamps negatives") {
  Tensor y = relu(Tensor::from_data({3}, {-1.0, 0.0, 2.0}));
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 2.0);
}

TEST_CASE("elementwise and structural ops pass gradcheck") {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor w34 = random_tensor({3, 4}, rng, false);

  SUBCASE("relu") {
    Tensor x = random_tensor({4, 6}, rng);
    Tensor p = random_tensor({4, 6}, rng, false);
    CHECK(gradcheck([&] { return probe(relu(x), p); }, {x}).max_relative_error < 1e-4);
  }
  SUBCASE("softmax") {
    Tensor p0 = random_tensor({3, 4}, rng, false);
    CHECK(gradcheck([&] { return probe(softmax(a, 0), p0); }, {a}).max_relative_error < 1e-4);
    CHECK(gradcheck([&] { return probe(softmax(a, 1), p0); }, {a}).max_relative_error < 1e-4);
  }
  SUBCASE("concat") {
    Tensor c = random_tensor({3, 2}, rng);
    Tensor p = random_tensor({3, 6}, rng, false);
    CHECK(gradcheck([&] { return probe(concat(a, c, 1), p); }, {a, c}).max_relative_error < 1e-4);
    Tensor p2 = random_tensor({6, 4}, rng, false);
    CHECK(gradcheck([&] { return probe(concat(a, b, 0), p2); }, {a, b}).max_relative_error < 1e-4);
    CHECK_THROWS_AS(concat(a, b, 2), ShapeError);
  }
  SUBCASE("mul / sub / add / scale") {
    auto f = [&] { return probe(scale(add(mul(a, b), sub(a, b)), 0.7), w34); };
    CHECK(gradcheck(f, {a, b}).max_relative_error < 1e-4);
  }
  SUBCASE("matmul, matmul_nt, transpose, slice") {
    Tensor c = random_tensor({4, 5}, rng);
    Tensor p = random_tensor({3, 5}, rng, false);
    CHECK(gradcheck([&] { return probe(matmul(a, c), p); }, {a, c}).max_relative_error < 1e-4);
    Tensor d = random_tensor({5, 4}, rng);
    CHECK(gradcheck([&] { return probe(matmul_nt(a, d), p); }, {a, d}).max_relative_error < 1e-4);
    Tensor pt = random_tensor({4, 3}, rng, false);
    CHECK(gradcheck([&] { return probe(transpose(a), pt); }, {a}).max_relative_error < 1e-4);
    Tensor ps = random_tensor({3, 2}, rng, false);
    CHECK(gradcheck([&] { return probe(slice(a, 1, 1, 2), ps); }, {a}).max_relative_error < 1e-4);
  }
  SUBCASE("linear") {
    Tensor x = random_tensor({6, 4}, rng);
    Tensor w = random_tensor({3, 4}, rng);
    Tensor bias = random_tensor({3}, rng);
    Tensor p = random_tensor({6, 3}, rng, false);
    CHECK(gradcheck([&] { return probe(linear(x, w, bias), p); }, {x, w, bias})
              .max_relative_error < 1e-4);
  }
  SUBCASE("maxpool") {
    Tensor x = random_tensor({2, 6, 4}, rng);
    Tensor p = random_tensor({2, 3, 2}, rng, false);
    CHECK(gradcheck([&] { return probe(maxpool2x2(x), p); }, {x}).max_relative_error < 1e-4);
  }
}

TEST_CASE("backward on sum gives ones, on squares gives 2p") {
  Tensor p = Tensor::from_data({2}, {1.0, 2.0}, true);
  sum(p).backward();
  CHECK(p.grad()[0] == 1.0);
  CHECK(p.grad()[1] == 1.0);
  p.zero_grad();
  sum(mul(p, p)).backward();
  CHECK(p.grad()[0] == 2.0);
  CHECK(p.grad()[1] == 4.0);
}

TEST_CASE("backward accumulates until cleared") {
  Tensor p = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor loss = sum(mul(scale(p, 3.0), p));
  loss.backward();
  const double g0 = p.grad()[0];
  loss.backward();
  CHECK(p.grad()[0] == 2.0 * g0);
  p.zero_grad();
  CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor p = Tensor::from_data({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(scale(p, 2.0).backward(), ShapeError);
}

TEST_CASE("no-grad guard skips graph construction") {
  Tensor p = Tensor::from_data({2}, {1.0, 2.0}, true);
  NoGradGuard guard;
  Tensor y = scale(p, 2.0);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("checked-finite mode raises on NaN") {
  set_check_finite(true);
  Tensor a = Tensor::from_data({1}, {std::nan("")});
  CHECK_THROWS_AS(scale(a, 1.0), NumericError);
  set_check_finite(false);
  CHECK_NOTHROW(scale(a, 1.0));
}

TEST_CASE("forward pass is bit-deterministic") {
  std::mt19937_64 rng(21);
  Tensor x = random_tensor({3, 12, 12}, rng, false);
  Tensor w = random_tensor({5, 3, 3, 3}, rng, false);
  Tensor b = random_tensor({5}, rng, false);
  Tensor y1 = maxpool2x2(relu(conv2d(x, w, b, 1, 1)));
  Tensor y2 = maxpool2x2(relu(conv2d(x, w, b, 1, 1)));
  for (std::size_t i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("adam: zero gradient leaves parameter unchanged") {
  ParameterSet params;
  Tensor& p = params.add("p", Tensor::from_data({1}, {3.0}, true));
  p.mutable_grad()[0] = 0.0;
  Adam adam;
  adam.step(params, 0.1);
  CHECK(p[0] == 3.0);
}

TEST_CASE("adam: first bias-corrected step moves by lr") {
  // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  ParameterSet params;
  Tensor& p = params.add("p", Tensor::from_data({1}, {1.0}, true));
  p.mutable_grad()[0] = 1.0;
  Adam adam;
  adam.step(params, 0.1);
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("adam: converges on x^2") {
  ParameterSet params;
  Tensor& x = params.add("x", Tensor::from_data({1}, {5.0}, true));
  Adam adam;
  for (int i = 0; i < 1000; ++i) {
    params.zero_grad();
    sum(mul(x, x)).backward();
    adam.step(params, 0.1);
  }
  CHECK(std::abs(x[0]) < 0.1);
}

TEST_CASE("adam: missing gradient and bad lr are errors") {
  ParameterSet params;
  params.add("p", Tensor::from_data({1}, {1.0}, true));
  Adam adam;
  CHECK_THROWS_AS(adam.step(params, 0.1), Error);
  CHECK_THROWS_AS(adam.step(params, 0.0), ConfigError);
}

TEST_CASE("count_parameters") {
  ParameterSet empty;
  CHECK(count_parameters(empty) == 0);
  ParameterSet lin;
  lin.add("w", Tensor::zeros({512, 256}, true));
  lin.add("b", Tensor::zeros({512}, true));
  CHECK(count_parameters(lin) == 131584);
  CHECK_THROWS_AS(lin.add("w", Tensor::zeros({1}, true)), Error);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  std::mt19937_64 rng(8);
  ParameterSet params;
  params.add("encoder.conv1.weight", random_tensor({4, 3, 3, 3}, rng));
  params.add("head.fc.bias", Tensor::from_data({3}, {-0.0, 1e-300, 3.141592653589793}, true));
  std::stringstream buffer;
  write_checkpoint(buffer, params);
  const std::string bytes = buffer.str();
  CHECK(bytes.substr(0, 5) == "ASCR1");
  // name length of the first entry, little-endian
  CHECK(static_cast<unsigned char>(bytes[5]) == std::string("encoder.conv1.weight").size());

  const auto loaded = read_checkpoint(buffer);
  REQUIRE(loaded.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(loaded[i].name == params.items()[i].name);
    CHECK(loaded[i].tensor.shape() == params.items()[i].tensor.shape());
    const auto a = loaded[i].tensor.data();
    const auto b = params.items()[i].tensor.data();
    CHECK(std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
  }

  std::stringstream bad("ASCRX");
  CHECK_THROWS_AS(read_checkpoint(bad), IoError);
}
