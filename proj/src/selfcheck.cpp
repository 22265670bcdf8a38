#include <cmath>
#include <functional>
#include <sstream>

#include "tomosar/cli.hpp"
#include "tomosar/metrics.hpp"

namespace tomo::cli {

namespace {

/// Geometry whose spatial-frequency step makes steering vectors of targets
/// `cell` metres apart exactly orthogonal.
AcquisitionGeometry orthogonal_geometry(Eigen::Index n, double cell) {
    RVector xi(n);
    for (Eigen::Index i = 0; i < n; ++i) xi(i) = (static_cast<double>(i) - 0.5 * static_cast<double>(n - 1)) / (n * cell);
    return AcquisitionGeometry::from_frequencies(xi);
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

SelfCheckResult check(const std::string& name, const std::function<std::string()>& body) {
    try {
        auto detail = body();
        return {name, detail.empty(), detail};
    } catch (const std::exception& e) {
        return {name, false, e.what()};
    }
}

}  // namespace

std::vector<SelfCheckResult> self_check(const std::string& fault) {
    if (!fault.empty() && fault != "q_dimension") throw InvalidArgument("unknown fault '" + fault + "'");
    std::vector<SelfCheckResult> out;

    const auto geo = make_uniform_geometry(14, 26.0);
    const auto grid = make_centered_grid(234, 1.0);
    const CMatrix A = steering_matrix(geo, grid);
    auto basis = build_correlation_subspace(A);
    if (fault == "q_dimension") {
        basis.Q = basis.Q.leftCols(basis.Q.cols() - 1).eval();
        basis.projector = basis.Q * basis.Q.adjoint();
    }
    auto scene = make_spaced_scene(grid, geo.rho_s(), 2, 0.5, 10.0, 1.0);
    const auto exact = exact_covariance(scene, geo, grid);

    out.push_back(check("steering_norm", [&] {
        const double err = std::abs(A.colwise().squaredNorm().maxCoeff() - 1.0 / 14.0);
        return err < 1e-14 ? "" : "|a|^2 deviates from 1/N by " + fmt(err);
    }));
    out.push_back(check("correlation_subspace_dimension", [&] {
        return basis.dimension() == 2 * geo.size() - 1 ? "" : "dimension " + std::to_string(basis.dimension());
    }));
    out.push_back(check("projector_idempotent", [&] {
        const double err = (basis.projector * basis.projector - basis.projector).norm();
        return err < 1e-10 ? "" : "residual " + fmt(err);
    }));
    out.push_back(check("exact_covariance_in_subspace", [&] {
        ScattererScene clean = scene;
        clean.noise_power = 0.0;
        const auto R = exact_covariance(clean, geo, grid).R;
        const double err = (basis.project(R) - R).norm() / R.norm();
        return err < 1e-10 ? "" : "relative residual " + fmt(err);
    }));
    out.push_back(check("noise_variance_exact", [&] {
        const double s2 = estimate_noise_variance(hermitian_eig(exact), 2);
        return std::abs(s2 - 1.0) < 1e-10 ? "" : "estimate " + fmt(s2);
    }));
    out.push_back(check("dykstra_feasible", [&] {
        const auto stack = simulate_snapshots(scene, geo, grid, 25, 7, ReflectivityModel::gaussian);
        const auto res = corrsub_optimal(sample_covariance(stack), basis, 2).estimate.R;
        const double neg = hermitian_eig(res).values.minCoeff();
        const double off = (basis.project(res) - res).norm() / res.norm();
        if (neg < -1e-9 * res.norm()) return "negative eigenvalue " + fmt(neg);
        return off < 1e-6 ? std::string() : "subspace residual " + fmt(off);
    }));
    out.push_back(check("oracle_support", [&] {
        const auto ogeo = orthogonal_geometry(14, 26.0);
        const CMatrix oA = steering_matrix(ogeo, grid);
        ScattererScene s;
        s.indices = {91, 143};
        s.powers = {1.0, 1.0};
        s.noise_power = 0.0;
        const auto stack = simulate_snapshots(s, ogeo, grid, 25, 11, ReflectivityModel::gaussian);
        const auto R = sample_covariance(stack).R;
        const std::vector<std::pair<std::string, DetectionResult>> runs = {
            {"nls", nls(stack, oA, grid, 2)},
            {"rcc_music", rcc_music(stack, R, oA, grid, 2)},
            {"rap_music", rap_music(R, oA, grid, 2)},
            {"sglrtc", sglrtc(stack, oA, grid, 2)},
            {"relax", relax(stack, oA, grid, 2)},
        };
        std::string bad;
        for (const auto& [name, r] : runs) {
            auto omega = r.omega;
            std::sort(omega.begin(), omega.end());
            if (omega != s.indices) bad += (bad.empty() ? "" : ",") + name;
        }
        return bad.empty() ? bad : "wrong support from " + bad;
    }));
    out.push_back(check("crlb_factor", [&] {
        const double z = crlb_factor(0.5);
        const double expect = 15.0 / (M_PI * M_PI * 0.25);
        if (std::abs(z - expect) > 1e-12) return "zeta(0.5) = " + fmt(z);
        return crlb_factor(1.3) == 1.0 ? std::string() : "zeta(1.3) = " + fmt(crlb_factor(1.3));
    }));
    out.push_back(check("determinism", [&] {
        ExperimentConfig cfg;
        cfg.trials = 8;
        cfg.workers = 2;
        MethodSpec m;
        cfg.methods = {m};
        const auto a = format_results(run_experiment(cfg), ResultFormat::csv);
        cfg.workers = 1;
        const auto b = format_results(run_experiment(cfg), ResultFormat::csv);
        return a == b ? "" : "results depend on worker count";
    }));
    return out;
}

}  // namespace tomo::cli
