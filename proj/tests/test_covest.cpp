#include <doctest.h>

#include <filesystem>
#include <random>

#include "support.hpp"
#include "tomosar/covest.hpp"

using namespace tomo;

namespace {

CMatrix random_hermitian(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    CMatrix X(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) X(i, j) = {d(rng), d(rng)};
    return 0.5 * (X + X.adjoint());
}

struct Fixture {
    AcquisitionGeometry geo = make_uniform_geometry(14, 26.0);
    ElevationGrid grid = make_centered_grid(234, 1.0);
    CMatrix A = steering_matrix(geo, grid);
    CorrelationSubspaceBasis basis = build_correlation_subspace(A);
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

}  // namespace

TEST_CASE("sample covariance is the normalised outer product") {
    SnapshotStack stack;
    stack.G.resize(3, 2);
    stack.G << cplx(1, 0), cplx(0, 1), cplx(2, -1), cplx(1, 1), cplx(0, 0), cplx(-1, 2);
    const auto R = sample_covariance(stack).R;
    for (int p = 0; p < 3; ++p) {
        for (int q = 0; q < 3; ++q) {
            const cplx ref = 0.5 * (stack.G(p, 0) * std::conj(stack.G(q, 0)) + stack.G(p, 1) * std::conj(stack.G(q, 1)));
            CHECK(std::abs(R(p, q) - ref) < 1e-15);
        }
    }
}

TEST_CASE("hermitian_eig orders, reconstructs and fixes phase") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const CMatrix R = random_hermitian(7, seed);
        const auto e = hermitian_eig(R);
        for (Eigen::Index i = 1; i < 7; ++i) CHECK(e.values(i - 1) >= e.values(i));
        const CMatrix back = e.vectors * e.values.cast<cplx>().asDiagonal() * e.vectors.adjoint();
        CHECK(testing::max_abs_diff(back, R) < 1e-12);
        CHECK(testing::max_abs_diff(e.vectors.adjoint() * e.vectors, CMatrix::Identity(7, 7)) < 1e-12);
        for (Eigen::Index c = 0; c < 7; ++c) {
            CHECK(e.vectors(0, c).imag() == 0.0);
            CHECK(e.vectors(0, c).real() > 0.0);
        }
        CHECK(hermitian_eig(R).vectors == e.vectors);
    }
    CMatrix bad = CMatrix::Identity(3, 3);
    bad(0, 1) = 1.0;
    CHECK_THROWS_AS(hermitian_eig(bad), NotHermitian);
}

TEST_CASE("noise variance is the mean of the trailing eigenvalues") {
    EigenSystem e;
    e.values.resize(5);
    e.values << 9.0, 4.0, 1.5, 1.0, 0.5;
    e.vectors = CMatrix::Identity(5, 5);
    CHECK(estimate_noise_variance(e, 2) == doctest::Approx(1.0));
    CHECK(estimate_noise_variance(e, 0) == doctest::Approx(3.2));
    CHECK_THROWS_AS(estimate_noise_variance(e, 5), InvalidArgument);
    CHECK_THROWS_AS(estimate_noise_variance(e, -1), InvalidArgument);

    const auto& f = fixture();
    ScattererScene scene{{100, 113}, {30.0, 12.0}, 0.7};
    CHECK(estimate_noise_variance(hermitian_eig(exact_covariance(scene, f.geo, f.grid)), 2) ==
          doctest::Approx(0.7).epsilon(1e-10));
}

TEST_CASE("correlation subspace has dimension 2N-1 and an orthogonal projector") {
    const auto& f = fixture();
    CHECK(f.basis.dimension() == 27);
    CHECK(f.basis.Q.rows() == 196);
    CHECK(testing::max_abs_diff(f.basis.Q.adjoint() * f.basis.Q, CMatrix::Identity(27, 27)) < 1e-10);
    CHECK(testing::max_abs_diff(f.basis.projector, f.basis.projector.adjoint()) < 1e-12);
    CHECK(testing::max_abs_diff(f.basis.projector * f.basis.projector, f.basis.projector) < 1e-10);
    // B = C C^H has rank 2N-1. Its spectrum decays steeply but stays well above rounding.
    CHECK(f.basis.b_eigenvalues(26) > 1e-14 * f.basis.b_eigenvalues(0));
    CHECK(f.basis.b_eigenvalues(27) < 1e-25 * f.basis.b_eigenvalues(0));
}

TEST_CASE("correlation vectors lie in the subspace") {
    const auto& f = fixture();
    for (double s : {-117.0, -30.0, 0.0, 3.5, 250.0}) {
        const CVector c = correlation_vector(f.geo, s);
        const CVector a = steering_vector(f.geo, s);
        for (Eigen::Index q = 0; q < 14; ++q)
            for (Eigen::Index p = 0; p < 14; ++p) CHECK(std::abs(c(14 * q + p) - a(p) * std::conj(a(q))) < 1e-16);
        CHECK((f.basis.projector * c - c).norm() < 1e-10 * c.norm());
    }
}

TEST_CASE("identity and noiseless covariances are fixed points of the projection") {
    const auto& f = fixture();
    const CMatrix I = CMatrix::Identity(14, 14);
    CHECK(testing::max_abs_diff(f.basis.project(I), I) < 1e-10);
    ScattererScene scene{{50, 60, 190}, {3.0, 1.0, 2.0}, 0.0};
    const auto R = exact_covariance(scene, f.geo, f.grid).R;
    CHECK((f.basis.project(R) - R).norm() < 1e-10 * R.norm());
}

TEST_CASE("projected matrices are Toeplitz for the uniform array") {
    const auto& f = fixture();
    const CMatrix X = random_hermitian(14, 11);
    const CMatrix P = f.basis.project(X);
    for (Eigen::Index p = 1; p < 14; ++p)
        for (Eigen::Index q = 1; q < 14; ++q) CHECK(std::abs(P(p, q) - P(p - 1, q - 1)) < 1e-10);
}

TEST_CASE("correlation subspace needs enough grid points") {
    const auto geo = make_uniform_geometry(14, 26.0);
    const auto grid = make_centered_grid(20, 1.0);
    CHECK_THROWS_AS(build_correlation_subspace(steering_matrix(geo, grid)), InvalidArgument);
}

TEST_CASE("suboptimal estimate is Hermitian, PSD and in the subspace") {
    const auto& f = fixture();
    const auto scene = make_spaced_scene(f.grid, 26.0, 2, 0.5, 0.0, 1.0);
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto scm = sample_covariance(simulate_snapshots(scene, f.geo, f.grid, 25, seed, ReflectivityModel::gaussian));
        const auto est = corrsub_suboptimal(scm, f.basis, 2);
        CHECK(est.method == CovMethod::corrsub_suboptimal);
        CHECK(testing::max_abs_diff(est.R, est.R.adjoint()) < 1e-12);
        CHECK(hermitian_eig(est.R).values.minCoeff() > -1e-12 * est.R.norm());

        const auto raw = corrsub_suboptimal(scm, f.basis, 2, false, false);
        CHECK((f.basis.project(raw.R) - raw.R).norm() < 1e-10 * raw.R.norm());
        CHECK(testing::max_abs_diff(raw.R, corrsub_simplified(scm, f.basis).R) < 1e-12);

        // Subtracting σ²I commutes with projection because I is in the subspace.
        const auto sub = corrsub_suboptimal(scm, f.basis, 2, true, false);
        const double s2 = estimate_noise_variance(hermitian_eig(scm), 2);
        CHECK(testing::max_abs_diff(sub.R + s2 * CMatrix::Identity(14, 14), raw.R) < 1e-10);
    }
}

TEST_CASE("Dykstra solution is feasible and no farther than the clipped projection") {
    const auto& f = fixture();
    const auto scene = make_spaced_scene(f.grid, 26.0, 2, 0.5, -6.0, 1.0);
    const auto scm = sample_covariance(simulate_snapshots(scene, f.geo, f.grid, 10, 77, ReflectivityModel::gaussian));
    const auto opt = corrsub_optimal(scm, f.basis, 2);
    const CMatrix& X = opt.estimate.R;
    CHECK(opt.report.iterations >= 1);
    CHECK(opt.report.iterations <= 500);
    CHECK(opt.report.violation.size() == static_cast<std::size_t>(opt.report.iterations));
    CHECK(hermitian_eig(X).values.minCoeff() > -1e-10 * X.norm());
    CHECK((f.basis.project(X) - X).norm() < 1e-5 * X.norm());

    // Closest feasible point: no farther from the target than other feasible matrices.
    const double s2 = estimate_noise_variance(hermitian_eig(scm), 2);
    const CMatrix target = scm.R - s2 * CMatrix::Identity(14, 14);
    const double gap = (X - target).norm();
    CHECK(gap <= target.norm() * (1.0 + 1e-6));
    for (double c : {0.1, 0.5, 1.0, 2.0}) CHECK(gap <= (c * CMatrix::Identity(14, 14) - target).norm() * (1.0 + 1e-6));
    const CMatrix truth = exact_covariance(ScattererScene{scene.indices, scene.powers, 0.0}, f.geo, f.grid).R;
    CHECK(gap <= (truth - target).norm() * (1.0 + 1e-6));

    DykstraOptions no_psd;
    no_psd.enforce_psd = false;
    const auto plain = corrsub_optimal(scm, f.basis, 2, no_psd);
    CHECK(plain.report.iterations == 1);
    CHECK(testing::max_abs_diff(plain.estimate.R, corrsub_suboptimal(scm, f.basis, 2, true, false).R) < 1e-12);

    DykstraOptions bad;
    bad.max_iter = 0;
    CHECK_THROWS_AS(corrsub_optimal(scm, f.basis, 2, bad), InvalidArgument);
}

TEST_CASE("Dykstra leaves a feasible input unchanged") {
    const auto& f = fixture();
    ScattererScene scene{{80, 140}, {5.0, 2.0}, 0.0};
    const auto R = exact_covariance(scene, f.geo, f.grid);
    DykstraOptions opts;
    opts.subtract_noise = false;
    const auto out = corrsub_optimal(R, f.basis, 2, opts);
    CHECK(out.report.converged);
    CHECK((out.estimate.R - R.R).norm() < 1e-8 * R.R.norm());
}

TEST_CASE("subspace distance") {
    const auto& f = fixture();
    ScattererScene scene{{100, 130}, {10.0, 10.0}, 1.0};
    const auto R = exact_covariance(scene, f.geo, f.grid);
    CHECK(subspace_distance(R, R, 2) < 1e-10);
    CHECK(subspace_distance(R.R, R.R, 2, SubspaceNorm::spectral) < 1e-10);
    const CMatrix other = exact_covariance(ScattererScene{{10, 200}, {10.0, 10.0}, 1.0}, f.geo, f.grid).R;
    const double d = subspace_distance(R.R, other, 2);
    CHECK(d > 0.5);
    CHECK(d <= std::sqrt(2.0) + 1e-12);
    CHECK(subspace_distance(R.R, other, 2, SubspaceNorm::spectral) <= d + 1e-12);
    CHECK_THROWS_AS(subspace_distance(R.R, other, 0), InvalidArgument);
}

TEST_CASE("covariance text dump round-trips") {
    const CMatrix R = random_hermitian(5, 3);
    const auto path = std::filesystem::temp_directory_path() / "tomosar_cov_roundtrip.txt";
    write_covariance_text(path, R);
    CHECK(read_covariance_text(path) == R);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_covariance_text(path), IoError);
}
