// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "nepqn/types.hpp"

namespace nepqn
{

// mt19937_64 output is pinned by the C++ standard; raw draws are mapped to doubles
// directly so that streams do not depend on the library's distribution implementations.
class DeterministicRng
{
public:
  explicit DeterministicRng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }  // [0, 1)

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  Complex complex_in_box(double half_width = 1.0)
  {
    const double re = uniform(-half_width, half_width);
    const double im = uniform(-half_width, half_width);
    return {re, im};
  }

  Vector complex_vector(Index n, double half_width = 1.0)
  {
    Vector v(n);
    for (Index i = 0; i < n; ++i)
    {
      v(i) = complex_in_box(half_width);
    }
    return v;
  }

  Matrix complex_matrix(Index rows, Index cols, double half_width = 1.0)
  {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
    {
      for (Index i = 0; i < rows; ++i)
      {
        m(i, j) = complex_in_box(half_width);
      }
    }
    return m;
  }

private:
  std::mt19937_64 gen_;
};

}  // namespace nepqn
