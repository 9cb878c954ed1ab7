// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace chemix {

// All numerics run in 64-bit floats; the networks are small enough that
// gradient-check headroom matters more than speed.
using Scalar = double;
using Index = Eigen::Index;

// Row-major throughout: tensors store row-major flat data and map onto
// these without copies.
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;
using VecMap = Eigen::Map<VectorX>;
using ConstVecMap = Eigen::Map<const VectorX>;
using ArrMap = Eigen::Map<ArrayX>;
using ConstArrMap = Eigen::Map<const ArrayX>;

}  // namespace chemix
