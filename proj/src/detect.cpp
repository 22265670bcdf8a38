#include "tomosar/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace tomo {

namespace {

constexpr double kGramCondFloor = 1e-12;

void check_order(Eigen::Index k, Eigen::Index n) {
    if (k < 1) throw InvalidArgument("detector needs k >= 1");
    if (k >= n) throw InvalidArgument("detector needs k < N");
}

void check_shapes(const CMatrix& A, const ElevationGrid& grid, Eigen::Index n) {
    if (A.rows() != n) throw InvalidArgument("steering matrix row count does not match the data");
    if (A.cols() != grid.size()) throw InvalidArgument("steering matrix does not match the grid");
}

CMatrix select_columns(const CMatrix& A, const std::vector<Eigen::Index>& omega) {
    CMatrix out(A.rows(), static_cast<Eigen::Index>(omega.size()));
    for (std::size_t i = 0; i < omega.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = A.col(omega[i]);
    return out;
}

/// Cholesky of A_Ω^H A_Ω with a conditioning check.
Eigen::LLT<CMatrix> gram_factor(const CMatrix& sub) {
    const CMatrix gram = sub.adjoint() * sub;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(gram, Eigen::EigenvaluesOnly);
    const double hi = es.eigenvalues().maxCoeff();
    const double lo = es.eigenvalues().minCoeff();
    if (!(hi > 0.0) || lo <= kGramCondFloor * hi) throw SingularGram("Gram matrix of selected steering columns is singular");
    Eigen::LLT<CMatrix> llt(gram);
    if (llt.info() != Eigen::Success) throw SingularGram("Gram matrix of selected steering columns is singular");
    return llt;
}

/// I − A_Ω (A_Ω^H A_Ω)^{-1} A_Ω^H; identity when Ω is empty.
CMatrix complement_projector(const CMatrix& A, const std::vector<Eigen::Index>& omega) {
    const auto n = A.rows();
    CMatrix P = CMatrix::Identity(n, n);
    if (omega.empty()) return P;
    const CMatrix sub = select_columns(A, omega);
    const auto llt = gram_factor(sub);
    P.noalias() -= sub * llt.solve(sub.adjoint());
    return P;
}

Eigen::Index argmax_excluding(const RVector& values, const std::vector<Eigen::Index>& excluded) {
    Eigen::Index best = -1;
    double best_val = -std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < values.size(); ++m) {
        if (std::find(excluded.begin(), excluded.end(), m) != excluded.end()) continue;
        if (values(m) > best_val) {
            best_val = values(m);
            best = m;
        }
    }
    if (best < 0) throw InvalidArgument("no grid point left to select");
    return best;
}

/// ‖W^H a_m‖² for every grid column.
RVector subspace_energy(const CMatrix& W, const CMatrix& A) {
    return (W.adjoint() * A).colwise().squaredNorm().transpose();
}

/// Σ_l |a_m^H y_l|² / ‖a_m‖² for every grid column.
RVector beam_energy(const CMatrix& Y, const CMatrix& A) {
    const RVector norms = A.colwise().squaredNorm().transpose();
    return (A.adjoint() * Y).rowwise().squaredNorm().cwiseQuotient(norms);
}

/// Covariance-domain power estimate diag((A^H A)^{-1} A^H R A (A^H A)^{-1}).
std::vector<double> covariance_powers(const CMatrix& R, const CMatrix& A, const std::vector<Eigen::Index>& omega) {
    const CMatrix sub = select_columns(A, omega);
    const auto llt = gram_factor(sub);
    const CMatrix pinv = llt.solve(sub.adjoint());
    const CMatrix S = pinv * R * pinv.adjoint();
    std::vector<double> out;
    for (Eigen::Index i = 0; i < S.rows(); ++i) out.push_back(std::max(0.0, S(i, i).real()));
    return out;
}

CMatrix ls_amplitudes(const CMatrix& G, const CMatrix& A, const std::vector<Eigen::Index>& omega) {
    const CMatrix sub = select_columns(A, omega);
    const auto llt = gram_factor(sub);
    return llt.solve(sub.adjoint() * G);
}

void finish(DetectionResult& result, const ElevationGrid& grid) {
    result.elevations.clear();
    for (auto m : result.omega) result.elevations.push_back(grid[m]);
}

std::vector<double> to_std(const RVector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string to_string(Criterion criterion) { return criterion == Criterion::aic ? "aic" : "mdl"; }

RVector ls_powers(const SnapshotStack& stack, const CMatrix& A, const std::vector<Eigen::Index>& omega) {
    if (omega.empty()) return RVector();
    const CMatrix X = ls_amplitudes(stack.G, A, omega);
    return X.rowwise().squaredNorm() / static_cast<double>(stack.looks());
}

double projection_objective(const SnapshotStack& stack, const CMatrix& A, const std::vector<Eigen::Index>& omega) {
    if (omega.empty()) return 0.0;
    const CMatrix P = CMatrix::Identity(A.rows(), A.rows()) - complement_projector(A, omega);
    return (P * stack.G).squaredNorm();
}

RVector music_spectrum(const CMatrix& R, const CMatrix& A, Eigen::Index k) {
    const auto n = R.rows();
    check_order(k, n);
    if (A.rows() != n) throw InvalidArgument("steering matrix row count does not match the covariance");
    const CMatrix Un = hermitian_eig(R).trailing(n - k);
    RVector denom = subspace_energy(Un, A);
    return denom.cwiseMax(kSpectrumFloor).cwiseInverse();
}

DetectionResult classical_music(const CMatrix& R, const CMatrix& A, const ElevationGrid& grid, Eigen::Index k) {
    check_shapes(A, grid, R.rows());
    const RVector spec = music_spectrum(R, A, k);
    const auto m = spec.size();

    std::vector<Eigen::Index> peaks;
    for (Eigen::Index i = 1; i + 1 < m; ++i) {
        if (spec(i) > spec(i - 1) && spec(i) > spec(i + 1)) peaks.push_back(i);
    }
    std::stable_sort(peaks.begin(), peaks.end(), [&](auto a, auto b) { return spec(a) > spec(b); });

    DetectionResult result;
    for (std::size_t i = 0; i < peaks.size() && result.k() < k; ++i) result.omega.push_back(peaks[i]);
    if (result.k() < k) {
        result.degraded = true;
        std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return spec(a) > spec(b); });
        for (auto idx : order) {
            if (result.k() == k) break;
            if (std::find(result.omega.begin(), result.omega.end(), idx) == result.omega.end()) {
                result.omega.push_back(idx);
            }
        }
    }
    result.spectra.push_back(spec);
    result.iterations = 1;
    result.powers = covariance_powers(R, A, result.omega);
    finish(result, grid);
    return result;
}

DetectionResult rap_music(const CMatrix& R, const CMatrix& A, const ElevationGrid& grid, Eigen::Index k) {
    const auto n = R.rows();
    check_order(k, n);
    check_shapes(A, grid, n);
    const CMatrix Us = hermitian_eig(R).leading(k);

    DetectionResult result;
    for (Eigen::Index i = 0; i < k; ++i) {
        const CMatrix W = complement_projector(A, result.omega) * Us;
        RVector spec = subspace_energy(W, A);
        result.omega.push_back(argmax_excluding(spec, result.omega));
        result.spectra.push_back(std::move(spec));
    }
    result.iterations = static_cast<int>(k);
    // Reject collinear final supports as well.
    result.powers = covariance_powers(R, A, result.omega);
    finish(result, grid);
    return result;
}

DetectionResult rcc_music(const SnapshotStack& stack, const CMatrix& R, const CMatrix& A, const ElevationGrid& grid,
                          Eigen::Index k) {
    const auto n = R.rows();
    check_order(k, n);
    check_shapes(A, grid, n);
    if (stack.channels() != n) throw InvalidArgument("snapshot stack does not match the covariance size");

    DetectionResult result;
    for (Eigen::Index i = 0; i < k; ++i) {
        CMatrix Ri = R;
        if (!result.omega.empty()) {
            const RVector lambda = ls_powers(stack, A, result.omega);
            for (std::size_t p = 0; p < result.omega.size(); ++p) {
                const auto a = A.col(result.omega[p]);
                Ri.noalias() -= lambda(static_cast<Eigen::Index>(p)) * (a * a.adjoint());
            }
        }
        const CMatrix Us = hermitian_eig(Ri).leading(k - i);
        RVector spec = subspace_energy(Us, A);
        result.omega.push_back(argmax_excluding(spec, result.omega));
        result.spectra.push_back(std::move(spec));
    }
    result.iterations = static_cast<int>(k);
    result.powers = to_std(ls_powers(stack, A, result.omega));
    finish(result, grid);
    return result;
}

DetectionResult sglrtc(const SnapshotStack& stack, const CMatrix& A, const ElevationGrid& grid, Eigen::Index k) {
    const auto n = stack.channels();
    check_order(k, n);
    check_shapes(A, grid, n);

    DetectionResult result;
    for (Eigen::Index i = 0; i < k; ++i) {
        const CMatrix residual = complement_projector(A, result.omega) * stack.G;
        RVector spec = beam_energy(residual, A);
        result.omega.push_back(argmax_excluding(spec, result.omega));
        result.spectra.push_back(std::move(spec));
    }
    result.iterations = static_cast<int>(k);
    result.powers = to_std(ls_powers(stack, A, result.omega));
    finish(result, grid);
    return result;
}

DetectionResult relax(const SnapshotStack& stack, const CMatrix& A, const ElevationGrid& grid, Eigen::Index k,
                      const RelaxOptions& options) {
    if (options.max_iter < 1) throw InvalidArgument("RELAX needs max_iter >= 1");
    DetectionResult result = sglrtc(stack, A, grid, k);
    result.spectra.clear();

    const CMatrix& G = stack.G;
    CMatrix amps = ls_amplitudes(G, A, result.omega);  // k × L
    auto residual_power = [&]() {
        CMatrix res = G;
        for (Eigen::Index p = 0; p < k; ++p) res.noalias() -= A.col(result.omega[p]) * amps.row(p);
        return res.squaredNorm();
    };
    double previous = residual_power();
    result.residual_power.push_back(previous);
    result.converged = false;
    result.iterations = 0;

    for (int cycle = 1; cycle <= options.max_iter; ++cycle) {
        bool changed = false;
        for (Eigen::Index p = 0; p < k; ++p) {
            CMatrix Y = G;
            std::vector<Eigen::Index> others;
            for (Eigen::Index q = 0; q < k; ++q) {
                if (q == p) continue;
                Y.noalias() -= A.col(result.omega[q]) * amps.row(q);
                others.push_back(result.omega[q]);
            }
            const RVector spec = beam_energy(Y, A);
            const Eigen::Index best = argmax_excluding(spec, others);
            if (best != result.omega[p]) changed = true;
            result.omega[p] = best;
            const auto a = A.col(best);
            amps.row(p) = (a.adjoint() * Y) / a.squaredNorm();
        }
        const double current = residual_power();
        result.residual_power.push_back(current);
        result.iterations = cycle;
        const double change = std::abs(previous - current);
        previous = current;
        if (!changed && change <= options.tol * std::max(current, std::numeric_limits<double>::min())) {
            result.converged = true;
            break;
        }
        if (!changed && current == 0.0) {
            result.converged = true;
            break;
        }
    }
    result.powers = to_std(ls_powers(stack, A, result.omega));
    finish(result, grid);
    return result;
}

DetectionResult nls(const SnapshotStack& stack, const CMatrix& A, const ElevationGrid& grid, Eigen::Index k) {
    const auto n = stack.channels();
    check_order(k, n);
    check_shapes(A, grid, n);
    if (k > 2) throw InvalidArgument("NLS combinatorial search is implemented for k <= 2 only");

    const auto m = A.cols();
    const CMatrix S = stack.G * stack.G.adjoint();
    const CMatrix H = A.adjoint() * (S * A);
    const CMatrix gram = A.adjoint() * A;

    DetectionResult result;
    if (k == 1) {
        Eigen::Index best = 0;
        double best_val = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
            const double val = H(i, i).real() / gram(i, i).real();
            if (val > best_val) {
                best_val = val;
                best = i;
            }
        }
        result.omega = {best};
    } else {
        Eigen::Index bi = -1;
        Eigen::Index bj = -1;
        double best_val = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < m; ++j) {
            const double gjj = gram(j, j).real();
            const double hjj = H(j, j).real();
            for (Eigen::Index i = 0; i < j; ++i) {
                const double gii = gram(i, i).real();
                const cplx gij = gram(i, j);
                const double det = gii * gjj - std::norm(gij);
                if (det <= kGramCondFloor * gii * gjj) continue;
                const double val = (gjj * H(i, i).real() + gii * hjj - 2.0 * (gij * std::conj(H(i, j))).real()) / det;
                // Column-major sweep: keep the lexicographically smallest (i, j) on ties.
                if (val > best_val || (val == best_val && (i < bi || (i == bi && j < bj)))) {
                    best_val = val;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi < 0) throw SingularGram("no well-conditioned pair of grid points");
        result.omega = {bi, bj};
    }
    result.iterations = 1;
    result.powers = to_std(ls_powers(stack, A, result.omega));
    finish(result, grid);
    return result;
}

ModelOrderResult estimate_model_order(const EigenSystem& eigs, Eigen::Index looks, Criterion criterion) {
    if (looks < 1) throw InvalidArgument("model order needs L >= 1");
    const auto n = eigs.dim();
    const double L = static_cast<double>(looks);
    ModelOrderResult out;
    out.criterion = criterion;
    out.criterion_values.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto tail = eigs.values.tail(n - k).cwiseMax(kSpectrumFloor);
        const double log_geo = tail.array().log().mean();
        const double arith = tail.mean();
        const double stat = log_geo - std::log(arith);  // ≤ 0
        const double dof = static_cast<double>(k * (2 * n - k));
        const double data = -L * static_cast<double>(n - k) * stat;
        out.criterion_values(k) = criterion == Criterion::aic ? 2.0 * data + 2.0 * dof : data + 0.5 * dof * std::log(L);
    }
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < n; ++k) {
        if (out.criterion_values(k) < out.criterion_values(best)) best = k;
    }
    out.k_hat = best;
    return out;
}

}  // namespace tomo
