// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "nepqn/types.hpp"

namespace nepqn::detail
{

struct PencilEigen
{
  std::vector<Complex> alphas;
  std::vector<Complex> betas;
  Matrix right_vectors;  // column i belongs to (alphas[i], betas[i])
};

// Full eigendecomposition of the generalized pencil (A, B): A v = (alpha/beta) B v,
// via LAPACK zggev. Infinite eigenvalues show up as beta == 0.
PencilEigen generalized_eigen(const Matrix &a, const Matrix &b);

}  // namespace nepqn::detail
