#include <doctest.h>

#include <algorithm>
#include <limits>
#include <set>

#include "support.hpp"
#include "tomosar/covest.hpp"
#include "tomosar/detect.hpp"

using namespace tomo;

namespace {

struct Oracle {
    AcquisitionGeometry geo = testing::orthogonal_geometry(14, 26.0);
    ElevationGrid grid = make_centered_grid(234, 1.0);
    CMatrix A = steering_matrix(geo, grid);
};

const Oracle& oracle() {
    static const Oracle o;
    return o;
}

std::vector<Eigen::Index> sorted(std::vector<Eigen::Index> v) {
    std::sort(v.begin(), v.end());
    return v;
}

/// Brute-force two-target NLS written without the Gram closed form.
std::vector<Eigen::Index> brute_force_nls(const SnapshotStack& stack, const CMatrix& A) {
    double best = -1.0;
    std::vector<Eigen::Index> arg;
    for (Eigen::Index i = 0; i < A.cols(); ++i) {
        for (Eigen::Index j = i + 1; j < A.cols(); ++j) {
            CMatrix B(A.rows(), 2);
            B << A.col(i), A.col(j);
            const CMatrix X = B.colPivHouseholderQr().solve(stack.G);
            const double v = (B * X).squaredNorm();
            if (v > best + 1e-12 * std::abs(best)) {
                best = v;
                arg = {i, j};
            }
        }
    }
    return arg;
}

}  // namespace

/// Noiseless stack whose steering vectors and amplitude sequences are both
/// mutually orthogonal, so every sample statistic equals its expectation.
SnapshotStack orthogonal_stack(const Oracle& o, const std::vector<Eigen::Index>& idx, const std::vector<double>& powers,
                               Eigen::Index looks) {
    SnapshotStack stack;
    stack.G = CMatrix::Zero(o.geo.size(), looks);
    for (std::size_t t = 0; t < idx.size(); ++t) {
        for (Eigen::Index l = 0; l < looks; ++l) {
            const cplx phase = std::polar(1.0, 0.7 * static_cast<double>(l));
            const cplx amp = t == 0 ? (l % 2 == 0 ? phase : phase * cplx(0, 1))
                                    : (l % 2 == 0 ? phase : -phase * cplx(0, 1));
            stack.G.col(l) += std::sqrt(powers[t]) * amp * o.A.col(idx[t]);
        }
    }
    return stack;
}

TEST_CASE("orthogonal helper stack has uncorrelated amplitudes") {
    const auto& o = oracle();
    const auto stack = orthogonal_stack(o, {91, 143}, {1.0, 2.5}, 24);
    const RVector p = ls_powers(stack, o.A, {91, 143});
    CHECK(p(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p(1) == doctest::Approx(2.5).epsilon(1e-12));
    const CMatrix R = sample_covariance(stack).R;
    const CMatrix expect = exact_covariance(ScattererScene{{91, 143}, {1.0, 2.5}, 0.0}, o.geo, o.grid).R;
    CHECK(testing::max_abs_diff(R, expect) < 1e-15);
}

TEST_CASE("all detectors recover an orthogonal noiseless support") {
    const auto& o = oracle();
    const std::vector<std::pair<Eigen::Index, Eigen::Index>> supports{{91, 143}, {40, 66}, {10, 218}, {117, 195}};
    for (const auto& [i, j] : supports) {
        for (const auto& powers : {std::vector<double>{1.0, 2.5}, std::vector<double>{3.0, 1.0}}) {
            const auto stack = orthogonal_stack(o, {i, j}, powers, 24);
            const auto R = sample_covariance(stack).R;
            const std::vector<Eigen::Index> truth{i, j};
            CAPTURE(i);
            CAPTURE(j);
            CHECK(sorted(nls(stack, o.A, o.grid, 2).omega) == truth);
            CHECK(sorted(rcc_music(stack, R, o.A, o.grid, 2).omega) == truth);
            CHECK(sorted(rap_music(R, o.A, o.grid, 2).omega) == truth);
            CHECK(sorted(sglrtc(stack, o.A, o.grid, 2).omega) == truth);
            CHECK(sorted(relax(stack, o.A, o.grid, 2).omega) == truth);
            CHECK(sorted(classical_music(R, o.A, o.grid, 2).omega) == truth);
        }
    }
}

TEST_CASE("joint-search detectors recover noiseless Gaussian scenes") {
    const auto& o = oracle();
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ScattererScene scene{{91, 143}, {1.0, 2.5}, 0.0};
        const auto stack = simulate_snapshots(scene, o.geo, o.grid, 25, seed, ReflectivityModel::gaussian);
        const auto R = sample_covariance(stack).R;
        const std::vector<Eigen::Index> truth{91, 143};
        CHECK(sorted(nls(stack, o.A, o.grid, 2).omega) == truth);
        CHECK(sorted(rap_music(R, o.A, o.grid, 2).omega) == truth);
        CHECK(sorted(relax(stack, o.A, o.grid, 2).omega) == truth);
        CHECK(sorted(classical_music(R, o.A, o.grid, 2).omega) == truth);
    }
}

TEST_CASE("single target recovery with k = 1") {
    const auto& o = oracle();
    ScattererScene scene{{60}, {3.0}, 0.0};
    const auto stack = simulate_snapshots(scene, o.geo, o.grid, 10, 4, ReflectivityModel::gaussian);
    const auto R = sample_covariance(stack).R;
    for (const auto& r : {nls(stack, o.A, o.grid, 1), rcc_music(stack, R, o.A, o.grid, 1), rap_music(R, o.A, o.grid, 1),
                          sglrtc(stack, o.A, o.grid, 1), relax(stack, o.A, o.grid, 1)}) {
        REQUIRE(r.k() == 1);
        CHECK(r.omega[0] == 60);
        CHECK(r.elevations[0] == o.grid[60]);
    }
    CHECK(rcc_music(stack, R, o.A, o.grid, 1).spectra.size() == 1);
}

TEST_CASE("powers of an orthogonal noiseless scene are exact") {
    const auto& o = oracle();
    const auto stack = orthogonal_stack(o, {91, 143}, {1.0, 4.0}, 24);
    const auto R = sample_covariance(stack).R;
    for (const auto& r : {rcc_music(stack, R, o.A, o.grid, 2), sglrtc(stack, o.A, o.grid, 2), nls(stack, o.A, o.grid, 2)}) {
        REQUIRE(r.k() == 2);
        const auto first = r.omega[0] == 91 ? 0u : 1u;
        CHECK(r.powers[first] == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(r.powers[1 - first] == doctest::Approx(4.0).epsilon(1e-10));
    }
    const auto music = rap_music(R, o.A, o.grid, 2);
    const auto first = music.omega[0] == 91 ? 0u : 1u;
    CHECK(music.powers[first] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(music.powers[1 - first] == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("NLS agrees with a brute-force least-squares search") {
    const auto geo = make_uniform_geometry(8, 26.0);
    const auto grid = make_centered_grid(60, 1.0);
    const CMatrix A = steering_matrix(geo, grid);
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        ScattererScene scene{{20, 35}, {8.0, 5.0}, 1.0};
        const auto stack = simulate_snapshots(scene, geo, grid, 6, seed, ReflectivityModel::gaussian);
        const auto r = nls(stack, A, grid, 2);
        CHECK(r.omega == brute_force_nls(stack, A));
        CHECK(projection_objective(stack, A, r.omega) >= projection_objective(stack, A, {20, 35}) - 1e-9);
    }
    ScattererScene one{{20}, {8.0}, 0.0};
    CHECK_THROWS_AS(nls(simulate_snapshots(one, geo, grid, 3, 1, ReflectivityModel::gaussian), A, grid, 3),
                    InvalidArgument);
}

TEST_CASE("NLS breaks ties toward the smallest pair") {
    const auto geo = make_uniform_geometry(4, 26.0);
    const auto grid = make_centered_grid(20, 1.0);
    SnapshotStack stack;
    stack.G = CMatrix::Zero(4, 3);
    const auto r = nls(stack, steering_matrix(geo, grid), grid, 2);
    CHECK(r.omega == std::vector<Eigen::Index>{0, 1});
}

TEST_CASE("RELAX never increases the residual power") {
    const auto geo = make_uniform_geometry(14, 26.0);
    const auto grid = make_centered_grid(234, 1.0);
    const CMatrix A = steering_matrix(geo, grid);
    const auto scene = make_spaced_scene(grid, 26.0, 2, 0.4, 20.0, 1.0);
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const auto stack = simulate_snapshots(scene, geo, grid, 25, seed, ReflectivityModel::gaussian);
        const auto r = relax(stack, A, grid, 2);
        REQUIRE(r.residual_power.size() >= 2);
        for (std::size_t i = 1; i < r.residual_power.size(); ++i) {
            CHECK(r.residual_power[i] <= r.residual_power[i - 1] * (1.0 + 1e-9));
        }
        CHECK(r.iterations <= 50);
    }
}

TEST_CASE("RAP-MUSIC spectra follow the projected objective") {
    const auto geo = make_uniform_geometry(10, 26.0);
    const auto grid = make_centered_grid(100, 1.0);
    const CMatrix A = steering_matrix(geo, grid);
    ScattererScene scene{{40, 55}, {10.0, 10.0}, 1.0};
    const auto R = exact_covariance(scene, geo, grid).R;
    const auto r = rap_music(R, A, grid, 2);
    REQUIRE(r.spectra.size() == 2);
    const CMatrix Us = hermitian_eig(R).leading(2);
    const CVector a0 = A.col(r.omega[0]);
    const CMatrix P = CMatrix::Identity(10, 10) - a0 * a0.adjoint() / a0.squaredNorm();
    for (Eigen::Index m : {0, 17, 42, 99}) {
        const double ref = (Us.adjoint() * (P * A.col(m))).squaredNorm();
        CHECK(r.spectra[1](m) == doctest::Approx(ref).epsilon(1e-10));
    }
    CHECK(r.spectra[1](r.omega[0]) < 1e-20);
}

TEST_CASE("MUSIC spectrum peaks at true locations of an exact covariance") {
    const auto geo = make_uniform_geometry(14, 26.0);
    const auto grid = make_centered_grid(234, 1.0);
    const CMatrix A = steering_matrix(geo, grid);
    ScattererScene scene{{80, 150}, {5.0, 5.0}, 1.0};
    const auto R = exact_covariance(scene, geo, grid).R;
    const RVector spec = music_spectrum(R, A, 2);
    CHECK(spec.minCoeff() > 0.0);
    const auto r = classical_music(R, A, grid, 2);
    CHECK_FALSE(r.degraded);
    CHECK(sorted(r.omega) == std::vector<Eigen::Index>{80, 150});
}

TEST_CASE("classical MUSIC pads a single-peak spectrum and flags it") {
    const auto geo = make_uniform_geometry(14, 26.0);
    const auto grid = make_centered_grid(234, 1.0);
    const CMatrix A = steering_matrix(geo, grid);
    ScattererScene scene{{117}, {100.0}, 1.0};
    const auto R = exact_covariance(scene, geo, grid).R;
    const auto r = classical_music(R, A, grid, 3);
    CHECK(r.k() == 3);
    CHECK(r.omega[0] == 117);
    std::set<Eigen::Index> unique(r.omega.begin(), r.omega.end());
    CHECK(unique.size() == 3);
}

TEST_CASE("detector preconditions") {
    const auto geo = make_uniform_geometry(6, 26.0);
    const auto grid = make_centered_grid(40, 1.0);
    const CMatrix A = steering_matrix(geo, grid);
    ScattererScene scene{{10}, {1.0}, 1.0};
    const auto stack = simulate_snapshots(scene, geo, grid, 5, 1, ReflectivityModel::gaussian);
    const auto R = sample_covariance(stack).R;
    CHECK_THROWS_AS(rap_music(R, A, grid, 0), InvalidArgument);
    CHECK_THROWS_AS(rap_music(R, A, grid, 6), InvalidArgument);
    CHECK_THROWS_AS(sglrtc(stack, A.leftCols(30), grid, 1), InvalidArgument);
    RelaxOptions bad;
    bad.max_iter = 0;
    CHECK_THROWS_AS(relax(stack, A, grid, 1, bad), InvalidArgument);
    CHECK_THROWS_AS(ls_powers(stack, A, {3, 3}), SingularGram);
}

TEST_CASE("model order criteria on exact eigenvalues") {
    EigenSystem e;
    e.values.resize(6);
    e.values << 50.0, 20.0, 1.0, 1.0, 1.0, 1.0;
    e.vectors = CMatrix::Identity(6, 6);
    const auto mdl = estimate_model_order(e, 25, Criterion::mdl);
    const auto aic = estimate_model_order(e, 25, Criterion::aic);
    CHECK(mdl.k_hat == 2);
    CHECK(aic.k_hat == 2);
    // Hand-evaluated criterion at k = 2: white tail gives zero data term.
    CHECK(mdl.criterion_values(2) == doctest::Approx(0.5 * 2 * 10 * std::log(25.0)));
    CHECK(aic.criterion_values(2) == doctest::Approx(2.0 * 2 * 10));
    // k = 0: data term −L·N·log(geo/arith).
    const double geo_mean = std::pow(50.0 * 20.0, 1.0 / 6.0);
    const double arith = 74.0 / 6.0;
    CHECK(mdl.criterion_values(0) == doctest::Approx(-25.0 * 6.0 * std::log(geo_mean / arith)));
}

TEST_CASE("model order on simulated data") {
    const auto geo = make_uniform_geometry(14, 26.0);
    const auto grid = make_centered_grid(234, 1.0);
    const auto scene = make_spaced_scene(grid, 26.0, 2, 1.0, 30.0, 1.0);
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto stack = simulate_snapshots(scene, geo, grid, 100, seed, ReflectivityModel::gaussian);
        hits += estimate_model_order(hermitian_eig(sample_covariance(stack)), 100, Criterion::mdl).k_hat == 2;
    }
    CHECK(hits >= 18);
}
