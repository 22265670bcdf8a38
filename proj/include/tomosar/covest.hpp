#pragma once

#include <filesystem>
#include <vector>

#include "tomosar/model.hpp"
#include "tomosar/types.hpp"

namespace tomo {

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Each eigenvector's first non-negligible entry is real
/// and positive so that repeated runs give identical bases.
struct EigenSystem {
    RVector values;
    CMatrix vectors;

    Eigen::Index dim() const { return values.size(); }
    /// Leading `count` eigenvectors (signal subspace).
    CMatrix leading(Eigen::Index count) const { return vectors.leftCols(count); }
    /// Trailing `count` eigenvectors (noise subspace).
    CMatrix trailing(Eigen::Index count) const { return vectors.rightCols(count); }
};

/// Relative tolerance on ‖R − R^H‖_F / ‖R‖_F accepted by hermitian_eig.
inline constexpr double kHermitianTol = 1e-9;

CovarianceEstimate sample_covariance(const SnapshotStack& stack);

/// Throws NotHermitian if the input is not Hermitian within kHermitianTol.
EigenSystem hermitian_eig(const CMatrix& R);
inline EigenSystem hermitian_eig(const CovarianceEstimate& cov) { return hermitian_eig(cov.R); }

/// Mean of the N−k smallest eigenvalues.
double estimate_noise_variance(const EigenSystem& eigs, Eigen::Index k);

/// vec(a(s)a(s)^H) in column-major order: entry N·q + p is a_p·conj(a_q).
CVector correlation_vector(const AcquisitionGeometry& geometry, double s);

/// Orthonormal basis of the correlation subspace spanned by the vectorized
/// outer products of all grid steering vectors.
struct CorrelationSubspaceBasis {
    CMatrix Q;               ///< N² × (2N−1)
    CMatrix projector;       ///< Q Q^H, N² × N²
    RVector b_eigenvalues;   ///< nonzero-candidate eigenvalues of B, descending
    Eigen::Index n = 0;      ///< array size N

    Eigen::Index dimension() const { return Q.cols(); }
    /// Applies QQ^H to vec(X) and reshapes back to N×N.
    CMatrix project(const CMatrix& X) const;
};

/// Keeps exactly the 2N−1 dominant eigenvectors of B = Σ c(i)c(i)^H.
/// Requires M ≥ 2N−1.
CorrelationSubspaceBasis build_correlation_subspace(const CMatrix& A);

CovarianceEstimate corrsub_suboptimal(const CovarianceEstimate& scm, const CorrelationSubspaceBasis& basis,
                                      Eigen::Index k, bool subtract_noise = true, bool enforce_psd = true);

/// Projection of the raw SCM onto the correlation subspace; no noise removal
/// and no eigenvalue clipping.
CovarianceEstimate corrsub_simplified(const CovarianceEstimate& scm, const CorrelationSubspaceBasis& basis);

struct DykstraOptions {
    int max_iter = 500;
    /// Absolute tolerance on the Frobenius change between successive PSD
    /// iterates. Non-positive means 1e-8·‖R̂‖_F.
    double tol = 0.0;
    bool subtract_noise = true;
    bool enforce_psd = true;
};

struct DykstraReport {
    int iterations = 0;
    bool converged = false;
    /// ‖(I − QQ^H) vec(X)‖ of the PSD iterate after each sweep.
    std::vector<double> violation;
};

struct OptimalEstimate {
    CovarianceEstimate estimate;
    DykstraReport report;
};

/// Frobenius-nearest matrix to R̂ − σ̂²I that lies in the correlation subspace
/// and the PSD cone, by Dykstra's alternating projections. On non-convergence
/// the last iterate is returned with report.converged = false.
OptimalEstimate corrsub_optimal(const CovarianceEstimate& scm, const CorrelationSubspaceBasis& basis,
                                Eigen::Index k, const DykstraOptions& options = {});

enum class SubspaceNorm { frobenius, spectral };

/// ‖E_s^H Ê_n‖ between the k-dimensional signal subspace of R_true and the
/// (N−k)-dimensional noise subspace of R_hat.
double subspace_distance(const CMatrix& R_true, const CMatrix& R_hat, Eigen::Index k,
                         SubspaceNorm norm = SubspaceNorm::frobenius);
inline double subspace_distance(const CovarianceEstimate& truth, const CovarianceEstimate& estimate,
                                Eigen::Index k, SubspaceNorm norm = SubspaceNorm::frobenius) {
    return subspace_distance(truth.R, estimate.R, k, norm);
}

/// Debug dump: a "# real" block then an "# imag" block, N rows each,
/// row-major, comma-separated, "%.17g" fields.
void write_covariance_text(const std::filesystem::path& path, const CMatrix& R);
CMatrix read_covariance_text(const std::filesystem::path& path);

}  // namespace tomo
