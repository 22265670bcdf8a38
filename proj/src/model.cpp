#include "tomosar/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace tomo {

namespace {

constexpr double kExtentTol = 1e-12;
constexpr double kSpacingTol = 1e-12;

void check_increasing(const RVector& v, const char* what) {
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (!(v(i) > v(i - 1))) {
            throw InvalidArgument(std::string(what) + " must be strictly increasing");
        }
    }
}

}  // namespace

std::string to_string(CovMethod method) {
    switch (method) {
        case CovMethod::exact: return "exact";
        case CovMethod::scm: return "scm";
        case CovMethod::corrsub_optimal: return "corrsub_optimal";
        case CovMethod::corrsub_suboptimal: return "corrsub_suboptimal";
        case CovMethod::corrsub_simplified: return "corrsub_simplified";
    }
    return "unknown";
}

CovMethod cov_method_from_string(const std::string& name) {
    for (auto m : {CovMethod::exact, CovMethod::scm, CovMethod::corrsub_optimal, CovMethod::corrsub_suboptimal,
                   CovMethod::corrsub_simplified}) {
        if (to_string(m) == name) return m;
    }
    throw InvalidArgument("unknown covariance estimator '" + name + "'");
}

AcquisitionGeometry::AcquisitionGeometry(RVector xi, double rho_s) : xi_(std::move(xi)), rho_s_(rho_s) {
    if (xi_.size() < 2) throw InvalidArgument("geometry needs at least two spatial frequencies");
    if (!(rho_s_ > 0.0) || !std::isfinite(rho_s_)) throw InvalidArgument("rho_s must be positive");
    check_increasing(xi_, "spatial frequencies");
    const double extent = xi_.maxCoeff() - xi_.minCoeff();
    if (std::abs(extent * rho_s_ - 1.0) > kExtentTol) {
        throw InvalidArgument("aperture extent does not match 1/rho_s");
    }
}

AcquisitionGeometry AcquisitionGeometry::from_frequencies(RVector xi) {
    if (xi.size() < 2) throw InvalidArgument("geometry needs at least two spatial frequencies");
    const double extent = xi.maxCoeff() - xi.minCoeff();
    if (!(extent > 0.0)) throw InvalidArgument("spatial frequencies must span a positive extent");
    return AcquisitionGeometry(std::move(xi), 1.0 / extent);
}

ElevationGrid::ElevationGrid(RVector s) : s_(std::move(s)) {
    if (s_.size() < 2) throw InvalidArgument("elevation grid needs at least two points");
    check_increasing(s_, "elevation grid");
    const double step = s_(1) - s_(0);
    for (Eigen::Index i = 2; i < s_.size(); ++i) {
        if (std::abs((s_(i) - s_(i - 1)) - step) > kSpacingTol * std::max(1.0, std::abs(step)) * 8.0) {
            throw InvalidArgument("elevation grid must be uniformly spaced");
        }
    }
}

void ScattererScene::validate(const ElevationGrid& grid) const {
    if (powers.size() != indices.size()) throw InvalidArgument("scene indices and powers differ in length");
    std::set<Eigen::Index> seen;
    for (auto idx : indices) {
        if (idx < 0 || idx >= grid.size()) throw InvalidArgument("scatterer index outside the grid");
        if (!seen.insert(idx).second) throw InvalidArgument("scatterer indices must be distinct");
    }
    for (double p : powers) {
        if (!(p > 0.0) || !std::isfinite(p)) throw InvalidArgument("scatterer powers must be positive");
    }
    if (!(noise_power >= 0.0) || !std::isfinite(noise_power)) {
        throw InvalidArgument("noise power must be nonnegative");
    }
}

AcquisitionGeometry make_uniform_geometry(Eigen::Index n, double rho_s) {
    if (n < 2) throw InvalidArgument("uniform geometry needs N >= 2");
    if (!(rho_s > 0.0)) throw InvalidArgument("rho_s must be positive");
    const double extent = 1.0 / rho_s;
    RVector xi(n);
    const double half = 0.5 * static_cast<double>(n - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        xi(i) = (static_cast<double>(i) - half) / static_cast<double>(n - 1) * extent;
    }
    return AcquisitionGeometry(std::move(xi), rho_s);
}

ElevationGrid make_centered_grid(Eigen::Index m, double spacing) {
    if (m < 2) throw InvalidArgument("grid needs M >= 2");
    if (!(spacing > 0.0)) throw InvalidArgument("grid spacing must be positive");
    RVector s(m);
    const double start = -0.5 * static_cast<double>(m) * spacing;
    for (Eigen::Index i = 0; i < m; ++i) s(i) = start + static_cast<double>(i) * spacing;
    return ElevationGrid(std::move(s));
}

CVector steering_vector(const AcquisitionGeometry& geometry, double s) {
    const auto n = geometry.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    CVector a(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i) = std::polar(inv_n, 2.0 * std::numbers::pi * geometry.xi()(i) * s);
    }
    return a;
}

CMatrix steering_matrix(const AcquisitionGeometry& geometry, const ElevationGrid& grid) {
    CMatrix A(geometry.size(), grid.size());
    for (Eigen::Index m = 0; m < grid.size(); ++m) A.col(m) = steering_vector(geometry, grid[m]);
    return A;
}

CovarianceEstimate exact_covariance(const ScattererScene& scene, const AcquisitionGeometry& geometry,
                                    const ElevationGrid& grid) {
    scene.validate(grid);
    const auto n = geometry.size();
    CMatrix R = scene.noise_power * CMatrix::Identity(n, n);
    for (Eigen::Index i = 0; i < scene.k(); ++i) {
        const CVector a = steering_vector(geometry, grid[scene.indices[i]]);
        R.noalias() += scene.powers[i] * (a * a.adjoint());
    }
    // exact Hermitian symmetry
    R = 0.5 * (R + R.adjoint()).eval();
    return {std::move(R), CovMethod::exact};
}

SnapshotStack simulate_snapshots(const ScattererScene& scene, const AcquisitionGeometry& geometry,
                                 const ElevationGrid& grid, Eigen::Index looks, std::uint64_t seed,
                                 ReflectivityModel reflectivity) {
    if (looks < 1) throw InvalidArgument("number of looks must be at least 1");
    scene.validate(grid);
    const auto n = geometry.size();
    const auto k = scene.k();

    CMatrix steer(n, k);
    for (Eigen::Index i = 0; i < k; ++i) steer.col(i) = steering_vector(geometry, grid[scene.indices[i]]);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    auto circular = [&](double variance) {
        const double sd = std::sqrt(0.5 * variance);
        const double re = unit(rng);
        const double im = unit(rng);
        return cplx(sd * re, sd * im);
    };

    SnapshotStack stack;
    stack.seed = seed;
    stack.G.resize(n, looks);
    CVector gamma(k);
    for (Eigen::Index l = 0; l < looks; ++l) {
        for (Eigen::Index i = 0; i < k; ++i) {
            gamma(i) = reflectivity == ReflectivityModel::gaussian ? circular(scene.powers[i])
                                                                   : cplx(std::sqrt(scene.powers[i]), 0.0);
        }
        auto col = stack.G.col(l);
        col.setZero();
        if (k > 0) col.noalias() += steer * gamma;
        if (scene.noise_power > 0.0) {
            for (Eigen::Index r = 0; r < n; ++r) col(r) += circular(scene.noise_power);
        }
    }
    return stack;
}

ScattererScene make_spaced_scene(const ElevationGrid& grid, double rho_s, Eigen::Index k, double alpha,
                                 double snr_db, double noise_power) {
    if (k < 0) throw InvalidArgument("k must be nonnegative");
    ScattererScene scene;
    scene.noise_power = noise_power;
    if (k == 0) return scene;
    if (!(alpha > 0.0) && k > 1) throw InvalidArgument("alpha must be positive");
    const auto step = std::max<Eigen::Index>(1, std::llround(alpha * rho_s / grid.spacing()));
    const auto span = step * (k - 1);
    const auto first = grid.size() / 2 - span / 2;
    const double power = (noise_power > 0.0 ? noise_power : 1.0) * std::pow(10.0, snr_db / 10.0);
    for (Eigen::Index i = 0; i < k; ++i) {
        scene.indices.push_back(first + i * step);
        scene.powers.push_back(power);
    }
    scene.validate(grid);
    return scene;
}

}  // namespace tomo
