#include "drbc/prior_builder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "drbc/csv_io.hpp"
#include "drbc/errors.hpp"

namespace drbc {

EmpiricalPrior::EmpiricalPrior(Matrix atoms, Vector weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.rows() < 1 || atoms_.cols() < 1) {
        throw std::invalid_argument("EmpiricalPrior: need at least one atom of positive dimension");
    }
    if (weights_.size() != atoms_.rows()) {
        throw std::invalid_argument("EmpiricalPrior: weight count does not match atom count");
    }
    if (!atoms_.allFinite() || !weights_.allFinite()) {
        throw std::invalid_argument("EmpiricalPrior: non-finite atoms or weights");
    }
    if ((weights_.array() < 0.0).any()) {
        throw std::invalid_argument("EmpiricalPrior: weights must be non-negative");
    }
    if (std::abs(weights_.sum() - 1.0) > 1e-12) {
        throw std::invalid_argument("EmpiricalPrior: weights must sum to one");
    }
}

EmpiricalPrior EmpiricalPrior::uniform(Matrix atoms) {
    const auto n = atoms.rows();
    return EmpiricalPrior(std::move(atoms), Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

EmpiricalPrior EmpiricalPrior::dirac(const Vector& atom, int copies) {
    if (copies < 1) throw std::invalid_argument("EmpiricalPrior::dirac: copies must be positive");
    Matrix atoms(copies, atom.size());
    atoms.rowwise() = atom.transpose();
    return uniform(std::move(atoms));
}

Vector estimate_window_drift(const Eigen::Ref<const Matrix>& prices, const MarketSpec& market,
                             double window_span) {
    if (prices.rows() < 2) throw DataError("estimate_window_drift: need at least two price rows");
    if (!(window_span > 0.0)) throw std::invalid_argument("estimate_window_drift: window_span must be positive");
    if (prices.cols() != market.dim()) throw std::invalid_argument("estimate_window_drift: dimension mismatch");
    if ((prices.array() <= 0.0).any()) throw DataError("estimate_window_drift: non-positive price");
    const Vector first = prices.row(0).transpose();
    const Vector last = prices.row(prices.rows() - 1).transpose();
    return (last.array().log() - first.array().log()).matrix() / window_span + market.ito_correction();
}

EmpiricalPrior build_prior(const Eigen::Ref<const Matrix>& prices, const MarketSpec& market,
                           const WindowingSpec& w) {
    if (w.window_len < 1 || w.n_windows < 1 || (w.mode == WindowMode::Type && w.n_types < 1)) {
        throw std::invalid_argument("build_prior: window counts must be positive");
    }
    const Eigen::Index needed = static_cast<Eigen::Index>(w.required_steps());
    const Eigen::Index available = prices.rows() - 1;
    if (available < needed) {
        throw DataError("build_prior: insufficient history, required " + std::to_string(needed) +
                        " steps but only " + std::to_string(available) + " available");
    }
    if ((prices.array() <= 0.0).any()) throw DataError("build_prior: non-positive price");

    const int d = market.dim();
    const Eigen::Index start = prices.rows() - 1 - needed;
    const double dt = market.dt();

    if (w.mode == WindowMode::Consecutive) {
        Matrix atoms(w.n_windows, d);
        for (int k = 0; k < w.n_windows; ++k) {
            const Eigen::Index a = start + static_cast<Eigen::Index>(k) * w.window_len;
            atoms.row(k) = estimate_window_drift(prices.middleRows(a, w.window_len + 1), market,
                                                 w.window_len * dt)
                               .transpose();
        }
        return EmpiricalPrior::uniform(std::move(atoms));
    }

    // Type mode: step j of the lookback goes to class j mod n_types.
    Matrix sums = Matrix::Zero(w.n_types, d);
    Vector counts = Vector::Zero(w.n_types);
    for (Eigen::Index j = 0; j < needed; ++j) {
        const auto cls = static_cast<Eigen::Index>(j % w.n_types);
        sums.row(cls) += (prices.row(start + j + 1).array().log() - prices.row(start + j).array().log()).matrix();
        counts(cls) += 1.0;
    }
    if ((counts.array() < 1.0).any()) {
        throw DataError("build_prior: some type classes received no returns");
    }
    Matrix atoms(w.n_types, d);
    for (int c = 0; c < w.n_types; ++c) {
        atoms.row(c) = (sums.row(c) / (counts(c) * dt)) + market.ito_correction().transpose();
    }
    return EmpiricalPrior::uniform(std::move(atoms));
}

EmpiricalPrior clamp_atoms(const EmpiricalPrior& prior, const Vector& lower, const Vector& upper) {
    if (lower.size() != prior.dim() || upper.size() != prior.dim()) {
        throw std::invalid_argument("clamp_atoms: box dimension mismatch");
    }
    if ((lower.array() >= upper.array()).any()) {
        throw std::invalid_argument("clamp_atoms: need lower < upper componentwise");
    }
    Matrix atoms = prior.atoms();
    for (Eigen::Index k = 0; k < atoms.rows(); ++k) {
        atoms.row(k) = atoms.row(k).cwiseMax(lower.transpose()).cwiseMin(upper.transpose());
    }
    return EmpiricalPrior(std::move(atoms), prior.weights());
}

void write_prior_csv(const EmpiricalPrior& prior, const std::filesystem::path& file) {
    auto out = open_for_write(file);
    std::vector<std::string> cells{"weight"};
    for (int i = 0; i < prior.dim(); ++i) cells.push_back("b_" + std::to_string(i + 1));
    write_csv_row(out, cells);
    for (Eigen::Index k = 0; k < prior.size(); ++k) {
        cells.clear();
        cells.push_back(format_double(prior.weights()(k)));
        for (int i = 0; i < prior.dim(); ++i) cells.push_back(format_double(prior.atoms()(k, i)));
        write_csv_row(out, cells);
    }
}

}  // namespace drbc
