// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "genpath/errors.hpp"
#include "genpath/tensor.hpp"

using namespace genpath;

TEST_CASE("tensor basics") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK(numel({2, 3, 4}) == 24);
  CHECK(to_string({2, 3}) == "(2, 3)");
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
  CHECK(t.all_finite());
  t[0] = 1.0 / 0.0;
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("slice, stack and set_slice round-trip") {
  Tensor a({2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor b({2, 2}, std::vector<double>{5, 6, 7, 8});
  const Tensor s = Tensor::stack(std::vector<Tensor>{a, b});
  CHECK(s.shape() == Shape{2, 2, 2});
  CHECK(s.slice(1) == b);
  Tensor c = s;
  c.set_slice(0, b);
  CHECK(c.slice(0) == b);
  CHECK_THROWS_AS(Tensor::stack(std::vector<Tensor>{a, Tensor(Shape{3})}), ShapeError);
}

TEST_CASE("rank-4 indexing is row-major") {
  Tensor t({2, 3, 4, 5});
  t.at(1, 2, 3, 4) = 9;
  CHECK(t[t.size() - 1] == 9);
}
