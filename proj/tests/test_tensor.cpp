#include <doctest.h>

#include "respore/rng.hpp"
#include "respore/tensor.hpp"

using namespace respore;

TEST_CASE("construction and fill") {
  Tensor t(Shape{1, 1, 2, 2}, 0.0);
  CHECK(t.count() == 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(t.at(0, 0, i, j) == 0.0);

  Tensor u(Shape{2, 3, 4, 5}, 1.5);
  CHECK(u.count() == 120);
  for (std::size_t i = 0; i < u.count(); ++i) CHECK(u.data()[i] == 1.5);

  // conv1 output shape at full width
  Tensor conv1(Shape{1, 64, 80, 80}, 0.0);
  CHECK(conv1.count() == 64u * 80 * 80);
}

TEST_CASE("invalid shapes rejected") {
  CHECK_THROWS_AS(Tensor(Shape{0, 1, 2, 2}, 0.0), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{1, -1, 2, 2}, 0.0), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 2, 0}, 0.0), ShapeError);
  std::vector<double> three{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 2, 2}, std::move(three)), ShapeError);
}

TEST_CASE("element round trip and bounds checks") {
  Tensor t(Shape{2, 3, 4, 5}, 0.0);
  Rng rng(7);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 5; ++w) {
          const double v = rng.uniform(-10.0, 10.0);
          t.at_mut(n, c, h, w) = v;
          CHECK(t.at(n, c, h, w) == v);
        }
  CHECK_THROWS_AS(t.at(2, 0, 0, 0), ShapeError);
  CHECK_THROWS_AS(t.at(0, 3, 0, 0), ShapeError);
  CHECK_THROWS_AS(t.at(0, 0, -1, 0), ShapeError);
  CHECK_THROWS_AS(t.at(0, 0, 0, 5), ShapeError);
}

TEST_CASE("memory layout is n-major, then c, h, w") {
  Tensor t(Shape{2, 2, 2, 2}, 0.0);
  t.at_mut(1, 0, 0, 0) = 5.0;
  CHECK(t.data()[8] == 5.0);
  t.at_mut(0, 1, 0, 1) = 7.0;
  CHECK(t.data()[5] == 7.0);
}

TEST_CASE("elementwise operations") {
  Tensor a(Shape{1, 1, 1, 2}, 0.0);
  a.at_mut(0, 0, 0, 0) = 1.0;
  a.at_mut(0, 0, 0, 1) = 2.0;
  Tensor b(Shape{1, 1, 1, 2}, 0.0);
  b.at_mut(0, 0, 0, 0) = 3.0;
  b.at_mut(0, 0, 0, 1) = 4.0;

  const Tensor s = add(a, b);
  CHECK(s.at(0, 0, 0, 0) == 4.0);
  CHECK(s.at(0, 0, 0, 1) == 6.0);

  const Tensor z = add(a, zeros_like(a));
  CHECK(z.at(0, 0, 0, 0) == a.at(0, 0, 0, 0));
  CHECK(z.at(0, 0, 0, 1) == a.at(0, 0, 0, 1));

  const Tensor sc = scale(a, 1.0);
  CHECK(sc.at(0, 0, 0, 0) == 1.0);
  CHECK(sc.at(0, 0, 0, 1) == 2.0);

  const Tensor d = sub(b, a);
  CHECK(d.at(0, 0, 0, 0) == 2.0);
  const Tensor m = mul(a, b);
  CHECK(m.at(0, 0, 0, 1) == 8.0);

  Tensor wrong(Shape{1, 1, 2, 1}, 0.0);
  CHECK_THROWS_AS(add(a, wrong), ShapeError);
  CHECK_THROWS_AS(sub(a, wrong), ShapeError);
  CHECK_THROWS_AS(mul(a, wrong), ShapeError);
}

TEST_CASE("add is commutative and associative on exactly representable values") {
  Rng rng(11);
  Tensor a(Shape{2, 1, 3, 3}, 0.0);
  Tensor b(Shape{2, 1, 3, 3}, 0.0);
  Tensor c(Shape{2, 1, 3, 3}, 0.0);
  for (std::size_t i = 0; i < a.count(); ++i) {
    // small integers: exact arithmetic
    a.data_mut()[i] = static_cast<double>(rng.uniform_index(201)) - 100.0;
    b.data_mut()[i] = static_cast<double>(rng.uniform_index(201)) - 100.0;
    c.data_mut()[i] = static_cast<double>(rng.uniform_index(201)) - 100.0;
  }
  const Tensor ab = add(a, b);
  const Tensor ba = add(b, a);
  const Tensor ab_c = add(ab, c);
  const Tensor a_bc = add(a, add(b, c));
  for (std::size_t i = 0; i < a.count(); ++i) {
    CHECK(ab.data()[i] == ba.data()[i]);
    CHECK(ab_c.data()[i] == a_bc.data()[i]);
  }
}

TEST_CASE("elementwise results keep the input shape") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Shape s{1 + static_cast<int>(rng.uniform_index(3)),
            1 + static_cast<int>(rng.uniform_index(4)),
            1 + static_cast<int>(rng.uniform_index(5)),
            1 + static_cast<int>(rng.uniform_index(6))};
    Tensor a(s, 1.0);
    Tensor b(s, 2.0);
    CHECK(add(a, b).shape() == s);
    CHECK(sub(a, b).shape() == s);
    CHECK(mul(a, b).shape() == s);
    CHECK(scale(a, 3.0).shape() == s);
  }
}

TEST_CASE("single-precision tensors") {
  TensorF t(Shape{1, 2, 2, 2}, 0.5f);
  CHECK(t.count() == 8);
  const TensorF s = add(t, t);
  CHECK(s.at(0, 1, 1, 1) == 1.0f);
  CHECK(scale(t, 2.0f).at(0, 0, 0, 0) == 1.0f);
}
