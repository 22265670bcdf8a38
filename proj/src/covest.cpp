#include "tomosar/covest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace tomo {

namespace {

constexpr double kPhaseRefTol = 1e-10;

void canonicalize_phase(CMatrix& vectors) {
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        auto col = vectors.col(c);
        const double scale = col.cwiseAbs().maxCoeff();
        for (Eigen::Index r = 0; r < col.size(); ++r) {
            const double mag = std::abs(col(r));
            if (mag > kPhaseRefTol * scale) {
                col *= std::conj(col(r)) / mag;
                col(r) = cplx(mag, 0.0);
                break;
            }
        }
    }
}

CMatrix hermitian_part(const CMatrix& X) { return 0.5 * (X + X.adjoint()); }

CMatrix psd_part(const CMatrix& X) {
    const EigenSystem eigs = hermitian_eig(X);
    CMatrix out = CMatrix::Zero(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < eigs.dim(); ++i) {
        if (eigs.values(i) >= 0.0) {
            const auto v = eigs.vectors.col(i);
            out.noalias() += eigs.values(i) * (v * v.adjoint());
        }
    }
    return hermitian_part(out);
}

CMatrix noise_removed(const CovarianceEstimate& scm, Eigen::Index k, bool subtract_noise) {
    if (!subtract_noise) return scm.R;
    const double sigma2 = estimate_noise_variance(hermitian_eig(scm.R), k);
    return scm.R - sigma2 * CMatrix::Identity(scm.dim(), scm.dim());
}

void check_basis(const CovarianceEstimate& scm, const CorrelationSubspaceBasis& basis) {
    if (scm.dim() != basis.n) throw InvalidArgument("covariance size does not match correlation subspace basis");
}

}  // namespace

CovarianceEstimate sample_covariance(const SnapshotStack& stack) {
    if (stack.looks() < 1) throw InvalidArgument("sample covariance needs at least one look");
    CMatrix R = (stack.G * stack.G.adjoint()) / static_cast<double>(stack.looks());
    return {hermitian_part(R), CovMethod::scm};
}

EigenSystem hermitian_eig(const CMatrix& R) {
    if (R.rows() != R.cols() || R.rows() == 0) throw InvalidArgument("hermitian_eig needs a nonempty square matrix");
    if (!R.allFinite()) throw InvalidArgument("hermitian_eig input has non-finite entries");
    const double norm = R.norm();
    if ((R - R.adjoint()).norm() > kHermitianTol * std::max(norm, 1e-300)) {
        throw NotHermitian("matrix is not Hermitian within tolerance");
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(R));
    if (solver.info() != Eigen::Success) throw Error("Hermitian eigensolver failed");
    EigenSystem out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    canonicalize_phase(out.vectors);
    return out;
}

double estimate_noise_variance(const EigenSystem& eigs, Eigen::Index k) {
    const auto n = eigs.dim();
    if (k < 0 || k >= n) throw InvalidArgument("noise variance needs 0 <= k < N");
    return eigs.values.tail(n - k).mean();
}

CVector correlation_vector(const AcquisitionGeometry& geometry, double s) {
    const CVector a = steering_vector(geometry, s);
    const auto n = a.size();
    CVector c(n * n);
    for (Eigen::Index q = 0; q < n; ++q) {
        for (Eigen::Index p = 0; p < n; ++p) c(n * q + p) = a(p) * std::conj(a(q));
    }
    return c;
}

CMatrix CorrelationSubspaceBasis::project(const CMatrix& X) const {
    if (X.rows() != n || X.cols() != n) throw InvalidArgument("matrix size does not match correlation subspace");
    const CVector v = Eigen::Map<const CVector>(X.data(), n * n);
    CVector w = projector * v;
    return Eigen::Map<CMatrix>(w.data(), n, n);
}

CorrelationSubspaceBasis build_correlation_subspace(const CMatrix& A) {
    const auto n = A.rows();
    const auto m = A.cols();
    const auto dim = 2 * n - 1;
    if (m < dim) throw InvalidArgument("correlation subspace needs M >= 2N-1 grid points");

    CMatrix C(n * n, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto a = A.col(i);
        for (Eigen::Index q = 0; q < n; ++q) {
            for (Eigen::Index p = 0; p < n; ++p) C(n * q + p, i) = a(p) * std::conj(a(q));
        }
    }

    // Left singular vectors of C are the eigenvectors of B = C C^H.
    Eigen::BDCSVD<CMatrix> svd(C, Eigen::ComputeThinU);
    CorrelationSubspaceBasis basis;
    basis.n = n;
    basis.Q = svd.matrixU().leftCols(dim);
    canonicalize_phase(basis.Q);
    basis.b_eigenvalues = svd.singularValues().cwiseAbs2();
    basis.projector = basis.Q * basis.Q.adjoint();
    return basis;
}

CovarianceEstimate corrsub_suboptimal(const CovarianceEstimate& scm, const CorrelationSubspaceBasis& basis,
                                      Eigen::Index k, bool subtract_noise, bool enforce_psd) {
    check_basis(scm, basis);
    CMatrix R = hermitian_part(basis.project(noise_removed(scm, k, subtract_noise)));
    if (enforce_psd) R = psd_part(R);
    return {std::move(R), CovMethod::corrsub_suboptimal};
}

CovarianceEstimate corrsub_simplified(const CovarianceEstimate& scm, const CorrelationSubspaceBasis& basis) {
    check_basis(scm, basis);
    return {hermitian_part(basis.project(scm.R)), CovMethod::corrsub_simplified};
}

OptimalEstimate corrsub_optimal(const CovarianceEstimate& scm, const CorrelationSubspaceBasis& basis,
                                Eigen::Index k, const DykstraOptions& options) {
    check_basis(scm, basis);
    if (options.max_iter < 1) throw InvalidArgument("Dykstra needs max_iter >= 1");
    const CMatrix target = noise_removed(scm, k, options.subtract_noise);

    OptimalEstimate out;
    out.estimate.method = CovMethod::corrsub_optimal;
    auto violation = [&](const CMatrix& X) { return (X - basis.project(X)).norm(); };

    if (!options.enforce_psd) {
        out.estimate.R = hermitian_part(basis.project(target));
        out.report.iterations = 1;
        out.report.converged = true;
        out.report.violation.push_back(violation(out.estimate.R));
        return out;
    }

    const double tol = options.tol > 0.0 ? options.tol : 1e-8 * std::max(scm.R.norm(), 1e-300);
    const auto n = scm.dim();
    CMatrix x = target;
    CMatrix p = CMatrix::Zero(n, n);
    CMatrix q = CMatrix::Zero(n, n);
    for (int it = 1; it <= options.max_iter; ++it) {
        const CMatrix y = hermitian_part(basis.project(x + p));
        p = x + p - y;
        CMatrix x_next = psd_part(y + q);
        q = y + q - x_next;
        const double change = (x_next - x).norm();
        x = std::move(x_next);
        out.report.iterations = it;
        out.report.violation.push_back(violation(x));
        if (change < tol) {
            out.report.converged = true;
            break;
        }
    }
    out.estimate.R = std::move(x);
    return out;
}

double subspace_distance(const CMatrix& R_true, const CMatrix& R_hat, Eigen::Index k, SubspaceNorm norm) {
    if (R_true.rows() != R_hat.rows()) throw InvalidArgument("subspace distance needs matrices of equal size");
    const auto n = R_true.rows();
    if (k < 1 || k >= n) throw InvalidArgument("subspace distance needs 1 <= k < N");
    const CMatrix Es = hermitian_eig(R_true).leading(k);
    const CMatrix En = hermitian_eig(R_hat).trailing(n - k);
    const CMatrix cross = Es.adjoint() * En;
    if (norm == SubspaceNorm::frobenius) return cross.norm();
    Eigen::JacobiSVD<CMatrix> svd(cross);
    return svd.singularValues()(0);
}

void write_covariance_text(const std::filesystem::path& path, const CMatrix& R) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    char buf[64];
    auto block = [&](const char* label, auto part) {
        out << "# " << label << '\n';
        for (Eigen::Index r = 0; r < R.rows(); ++r) {
            for (Eigen::Index c = 0; c < R.cols(); ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", part(R(r, c)));
                if (c) out << ',';
                out << buf;
            }
            out << '\n';
        }
    };
    block("real", [](cplx z) { return z.real(); });
    block("imag", [](cplx z) { return z.imag(); });
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

CMatrix read_covariance_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::vector<double>> rows[2];
    int block = -1;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            block = line.find("imag") != std::string::npos ? 1 : 0;
            continue;
        }
        if (block < 0) throw IoError("covariance dump missing block header");
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) vals.push_back(std::stod(field));
        rows[block].push_back(std::move(vals));
    }
    const auto n = static_cast<Eigen::Index>(rows[0].size());
    if (n == 0 || rows[1].size() != rows[0].size()) throw IoError("malformed covariance dump");
    CMatrix R(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        if (static_cast<Eigen::Index>(rows[0][r].size()) != n || static_cast<Eigen::Index>(rows[1][r].size()) != n) {
            throw IoError("malformed covariance dump row");
        }
        for (Eigen::Index c = 0; c < n; ++c) R(r, c) = cplx(rows[0][r][c], rows[1][r][c]);
    }
    return R;
}

}  // namespace tomo
