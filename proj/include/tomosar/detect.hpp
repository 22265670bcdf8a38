#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tomosar/covest.hpp"
#include "tomosar/model.hpp"

namespace tomo {

/// Output of every detector. Grid indices are 0-based and listed in the
/// order they were detected.
struct DetectionResult {
    std::vector<Eigen::Index> omega;
    std::vector<double> elevations;
    std::vector<double> powers;
    /// Per-iteration search spectra, one entry per grid point, when the
    /// detector has one.
    std::vector<RVector> spectra;
    /// Fewer than k peaks existed and the output was padded.
    bool degraded = false;
    /// False when an iterative detector stopped at its iteration cap.
    bool converged = true;
    int iterations = 0;
    /// Residual power ‖G − A_Ω Γ‖²_F after each RELAX cycle (cycle 0 is the
    /// initial SGLRTC fit).
    std::vector<double> residual_power;

    Eigen::Index k() const { return static_cast<Eigen::Index>(omega.size()); }
};

enum class Criterion { aic, mdl };

struct ModelOrderResult {
    Eigen::Index k_hat = 0;
    RVector criterion_values;  ///< indexed by candidate k = 0..N-1
    Criterion criterion = Criterion::mdl;
};

/// Denominators below this floor are clamped before inversion.
inline constexpr double kSpectrumFloor = 1e-30;

/// 1 / (a^H U_n U_n^H a) for each grid column, U_n the N−k trailing eigenvectors of R.
RVector music_spectrum(const CMatrix& R, const CMatrix& A, Eigen::Index k);

/// k largest strict interior local maxima of the MUSIC spectrum, padded from
/// the largest remaining entries (degraded) when fewer peaks exist.
DetectionResult classical_music(const CMatrix& R, const CMatrix& A, const ElevationGrid& grid, Eigen::Index k);

/// Recursively applied and projected MUSIC with a signal subspace fixed from R.
DetectionResult rap_music(const CMatrix& R, const CMatrix& A, const ElevationGrid& grid, Eigen::Index k);

/// Recursive covariance-cancelled MUSIC: each detected scatterer's estimated
/// component Λ(p)·a a^H is removed from R before the next search, and the
/// signal subspace of the deflated covariance (k−i+1 vectors) drives it.
DetectionResult rcc_music(const SnapshotStack& stack, const CMatrix& R, const CMatrix& A, const ElevationGrid& grid,
                          Eigen::Index k);

/// Successive beamforming peak search with orthogonal-complement cancellation
/// of the snapshots (simultaneous OMP).
DetectionResult sglrtc(const SnapshotStack& stack, const CMatrix& A, const ElevationGrid& grid, Eigen::Index k);

struct RelaxOptions {
    double tol = 1e-6;
    int max_iter = 50;
};

/// Cyclic one-dimensional refinement initialised by sglrtc.
DetectionResult relax(const SnapshotStack& stack, const CMatrix& A, const ElevationGrid& grid, Eigen::Index k,
                      const RelaxOptions& options = {});

/// Exhaustive search over grid k-subsets (k ≤ 2) maximizing Σ_l ‖Π_Ω g(l)‖².
DetectionResult nls(const SnapshotStack& stack, const CMatrix& A, const ElevationGrid& grid, Eigen::Index k);

/// Σ_l ‖Π_Ω g(l)‖² for an arbitrary support.
double projection_objective(const SnapshotStack& stack, const CMatrix& A, const std::vector<Eigen::Index>& omega);

/// Per-snapshot least-squares amplitudes over the selected columns, squared
/// and averaged over looks.
RVector ls_powers(const SnapshotStack& stack, const CMatrix& A, const std::vector<Eigen::Index>& omega);

ModelOrderResult estimate_model_order(const EigenSystem& eigs, Eigen::Index looks, Criterion criterion);

std::string to_string(Criterion criterion);

}  // namespace tomo
