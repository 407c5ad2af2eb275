// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pencil.hpp"

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace nepqn::detail
{

PencilEigen generalized_eigen(const Matrix &a, const Matrix &b)
{
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
  {
    throw ConfigError("generalized_eigen needs square matrices of equal size");
  }
  const auto n = static_cast<lapack_int>(a.rows());
  Matrix aw = a, bw = b;  // zggev overwrites its inputs
  PencilEigen out;
  out.alphas.resize(static_cast<size_t>(n));
  out.betas.resize(static_cast<size_t>(n));
  out.right_vectors.resize(n, n);
  const lapack_int info =
      LAPACKE_zggev(LAPACK_COL_MAJOR, 'N', 'V', n, aw.data(), n, bw.data(), n,
                    out.alphas.data(), out.betas.data(), nullptr, 1,
                    out.right_vectors.data(), n);
  if (info != 0)
  {
    throw NepError("zggev failed with info = " + std::to_string(info));
  }
  return out;
}

}  // namespace nepqn::detail
