#include "drbc/covariance.hpp"

#include <algorithm>
#include <stdexcept>

namespace drbc {

ShrinkageEstimate ledoit_wolf_detailed(const Matrix& returns) {
    const Eigen::Index n = returns.rows();
    const Eigen::Index d = returns.cols();
    if (n < 2) throw std::invalid_argument("ledoit_wolf: need at least 2 observations");
    if (d < 1) throw std::invalid_argument("ledoit_wolf: need at least one column");

    const Matrix x = returns.rowwise() - returns.colwise().mean();
    const double nn = static_cast<double>(n);
    Matrix s = (x.transpose() * x) / nn;
    s = 0.5 * (s + s.transpose());

    const double mu = s.trace() / static_cast<double>(d);
    Matrix target = mu * Matrix::Identity(d, d);
    const double d2 = (s - target).squaredNorm();

    double b2 = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const Vector xt = x.row(t).transpose();
        b2 += (xt * xt.transpose() - s).squaredNorm();
    }
    b2 /= nn * nn;
    b2 = std::min(b2, d2);

    ShrinkageEstimate out;
    out.intensity = d2 > 0.0 ? b2 / d2 : 0.0;
    out.covariance = out.intensity * target + (1.0 - out.intensity) * s;
    return out;
}

Matrix ledoit_wolf(const Matrix& returns) {
    return ledoit_wolf_detailed(returns).covariance;
}

}  // namespace drbc
