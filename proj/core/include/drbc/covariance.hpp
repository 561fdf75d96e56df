#pragma once

#include "drbc/types.hpp"

namespace drbc {

struct ShrinkageEstimate {
    Matrix covariance;
    double intensity = 0.0;
};

// Ledoit-Wolf shrinkage of the sample covariance towards (tr S / d) I.
// Rows of `returns` are observations; the sample covariance uses 1/n.
ShrinkageEstimate ledoit_wolf_detailed(const Matrix& returns);
Matrix ledoit_wolf(const Matrix& returns);

}  // namespace drbc
