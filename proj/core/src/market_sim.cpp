#include "drbc/market_sim.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "drbc/csv_io.hpp"
#include "drbc/errors.hpp"
#include "drbc/rng.hpp"

namespace drbc {

MarketSpec::MarketSpec(double rate, Matrix sigma, double horizon, double dt, double max_condition)
    : rate_(rate), sigma_(std::move(sigma)), horizon_(horizon), dt_(dt) {
    if (sigma_.rows() < 1 || sigma_.rows() != sigma_.cols()) {
        throw std::invalid_argument("MarketSpec: sigma must be a non-empty square matrix");
    }
    if (!std::isfinite(rate_)) throw std::invalid_argument("MarketSpec: rate must be finite");
    if (!(horizon_ > 0.0)) throw std::invalid_argument("MarketSpec: horizon T must be positive");
    if (!(dt_ > 0.0) || !(dt_ < horizon_)) {
        throw std::invalid_argument("MarketSpec: dt must satisfy 0 < dt < T");
    }
    if (!sigma_.allFinite()) throw std::invalid_argument("MarketSpec: sigma has non-finite entries");

    Eigen::JacobiSVD<Matrix> svd(sigma_);
    const Vector sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (!(smin > 0.0) || smax / smin > max_condition) {
        throw std::invalid_argument("MarketSpec: sigma is singular or its condition number exceeds " +
                                    std::to_string(max_condition));
    }
    sigma_inv_ = sigma_.inverse();
    ito_ = 0.5 * sigma_.rowwise().squaredNorm();
}

Vector MarketSpec::market_price_of_risk(const Vector& drift) const {
    return sigma_inv_ * (drift.array() - rate_).matrix();
}

MarketSpec MarketSpec::with_horizon(double horizon) const {
    MarketSpec copy = *this;
    if (!(horizon > 0.0) || !(dt_ < horizon)) {
        throw std::invalid_argument("MarketSpec::with_horizon: need horizon > dt");
    }
    copy.horizon_ = horizon;
    return copy;
}

SinusoidalDriftSpec SinusoidalDriftSpec::sample(int dim, double b0, KappaLaw law, std::uint64_t seed) {
    SinusoidalDriftSpec spec;
    spec.b0 = b0;
    spec.kappa.resize(dim);
    const CounterRng rng(seed, 0xCA99Au);
    std::vector<double> z(static_cast<std::size_t>(dim));
    rng.normals(0, z);
    const double mean = law == KappaLaw::Smooth ? 0.0 : 12.0;
    const double sd = law == KappaLaw::Smooth ? 1.0 : std::sqrt(10.0);
    for (int i = 0; i < dim; ++i) spec.kappa(i) = mean + sd * z[static_cast<std::size_t>(i)];
    spec.validate();
    return spec;
}

void SinusoidalDriftSpec::validate() const {
    if (!(b0 > 0.0)) throw std::invalid_argument("SinusoidalDriftSpec: B0 must be positive");
    if (kappa.size() < 1) throw std::invalid_argument("SinusoidalDriftSpec: kappa is empty");
}

Vector drift_at(const SinusoidalDriftSpec& spec, double t) {
    if (t < 0.0) throw std::invalid_argument("drift_at: t must be non-negative");
    const double phase = 2.0 * std::numbers::pi * t;
    return (0.5 * spec.b0) * (1.0 + 2.0 * (phase * spec.kappa.array()).cos()).matrix();
}

Vector drift_at(const DriftModel& model, double t) {
    if (const auto* s = std::get_if<SinusoidalDriftSpec>(&model)) return drift_at(*s, t);
    return std::get<Vector>(model);
}

PathGrid simulate_paths(const MarketSpec& market, const DriftModel& drift, int n_steps,
                        std::uint64_t seed, std::uint64_t path_id, double initial_price) {
    if (n_steps < 1) throw std::invalid_argument("simulate_paths: n_steps must be at least 1");
    if (!(initial_price > 0.0)) throw std::invalid_argument("simulate_paths: initial price must be positive");
    const int d = market.dim();
    if (drift_at(drift, 0.0).size() != d) {
        throw std::invalid_argument("simulate_paths: drift dimension does not match the market");
    }

    const double dt = market.dt();
    const double sqdt = std::sqrt(dt);
    PathGrid path;
    path.times.resize(static_cast<std::size_t>(n_steps) + 1);
    path.prices.resize(n_steps + 1, d);
    path.brownian.resize(n_steps, d);

    const CounterRng rng(seed, path_id);
    std::vector<double> z(static_cast<std::size_t>(d));
    Vector log_s = Vector::Constant(d, std::log(initial_price));
    path.prices.row(0).setConstant(initial_price);
    path.times[0] = 0.0;
    for (int i = 0; i < n_steps; ++i) {
        const double t = i * dt;
        rng.normals(static_cast<std::uint64_t>(i), z);
        const Vector dw = sqdt * Eigen::Map<const Vector>(z.data(), d);
        path.brownian.row(i) = dw.transpose();
        log_s += (drift_at(drift, t) - market.ito_correction()) * dt + market.sigma() * dw;
        path.prices.row(i + 1) = log_s.array().exp().matrix().transpose();
        path.times[static_cast<std::size_t>(i) + 1] = (i + 1) * dt;
    }
    return path;
}

Vector observation_from_prices(const Eigen::Ref<const Vector>& start_prices,
                               const Eigen::Ref<const Vector>& prices, double elapsed,
                               const MarketSpec& market) {
    if ((start_prices.array() <= 0.0).any() || (prices.array() <= 0.0).any()) {
        throw DataError("observation: prices must be strictly positive");
    }
    const Vector log_ret = (prices.array().log() - start_prices.array().log()).matrix();
    const Vector adj = log_ret + (market.ito_correction().array() - market.rate()).matrix() * elapsed;
    return market.sigma_inv() * adj;
}

Matrix observation_Y(const PathGrid& path, const MarketSpec& market) {
    if (path.dim() != market.dim()) throw std::invalid_argument("observation_Y: dimension mismatch");
    Matrix y(path.prices.rows(), path.dim());
    const Vector s0 = path.prices.row(0).transpose();
    for (Eigen::Index i = 0; i < path.prices.rows(); ++i) {
        const double t = path.times[static_cast<std::size_t>(i)] - path.times[0];
        y.row(i) = observation_from_prices(s0, path.prices.row(i).transpose(), t, market).transpose();
    }
    return y;
}

Vector observation_Y_at(const PathGrid& path, const MarketSpec& market, double t) {
    const double tol = 1e-9 * market.dt();
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        if (std::abs(path.times[i] - t) <= tol) {
            return observation_from_prices(path.prices.row(0).transpose(),
                                           path.prices.row(static_cast<Eigen::Index>(i)).transpose(),
                                           path.times[i] - path.times[0], market);
        }
    }
    throw std::invalid_argument("observation_Y_at: t = " + format_double(t) +
                                " is not a grid point (no interpolation)");
}

void write_path_csv(const PathGrid& path, const std::filesystem::path& file) {
    auto out = open_for_write(file);
    std::vector<std::string> cells{"time"};
    for (int i = 0; i < path.dim(); ++i) cells.push_back("asset_" + std::to_string(i + 1));
    write_csv_row(out, cells);
    for (Eigen::Index r = 0; r < path.prices.rows(); ++r) {
        cells.clear();
        cells.push_back(format_double(path.times[static_cast<std::size_t>(r)]));
        for (int c = 0; c < path.dim(); ++c) cells.push_back(format_double(path.prices(r, c)));
        write_csv_row(out, cells);
    }
}

PathGrid read_path_csv(const std::filesystem::path& file) {
    const LabeledTable table = read_labeled_csv(file);
    if (table.header.front() != "time") {
        throw DataError("path csv: first column must be 'time' in " + file.string());
    }
    if (table.values.rows() < 2) throw DataError("path csv: need at least two rows");
    PathGrid path;
    path.prices = table.values;
    path.times.reserve(table.labels.size());
    for (const auto& label : table.labels) {
        double v = 0.0;
        const auto res = std::from_chars(label.data(), label.data() + label.size(), v);
        if (res.ec != std::errc()) throw DataError("path csv: bad time value '" + label + "'");
        path.times.push_back(v);
    }
    if ((path.prices.array() <= 0.0).any()) throw DataError("path csv: prices must be positive");
    return path;
}

}  // namespace drbc
