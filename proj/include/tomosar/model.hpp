#pragma once

#include <cstdint>
#include <vector>

#include "tomosar/types.hpp"

namespace tomo {

/// Spatial frequencies of the multipass aperture. The Rayleigh resolution is
/// the reciprocal of the aperture extent.
class AcquisitionGeometry {
public:
    /// Validates that xi is strictly increasing with at least two entries and
    /// that 1/rho_s matches the extent of xi.
    AcquisitionGeometry(RVector xi, double rho_s);

    /// Builds a geometry whose Rayleigh resolution is implied by the extent.
    static AcquisitionGeometry from_frequencies(RVector xi);

    const RVector& xi() const { return xi_; }
    double rho_s() const { return rho_s_; }
    Eigen::Index size() const { return xi_.size(); }

private:
    RVector xi_;
    double rho_s_;
};

/// Uniformly spaced elevation samples (meters).
class ElevationGrid {
public:
    explicit ElevationGrid(RVector s);

    const RVector& s() const { return s_; }
    Eigen::Index size() const { return s_.size(); }
    double spacing() const { return s_(1) - s_(0); }
    double operator[](Eigen::Index m) const { return s_(m); }

private:
    RVector s_;
};

/// Ground-truth point scatterers on the grid. Indices are 0-based.
struct ScattererScene {
    std::vector<Eigen::Index> indices;
    std::vector<double> powers;
    double noise_power = 0.0;

    Eigen::Index k() const { return static_cast<Eigen::Index>(indices.size()); }
    /// Throws InvalidArgument if indices repeat, fall outside the grid, or a power is not positive.
    void validate(const ElevationGrid& grid) const;
};

enum class ReflectivityModel { gaussian, deterministic };

/// N×L multi-look data matrix.
struct SnapshotStack {
    CMatrix G;
    std::uint64_t seed = 0;

    Eigen::Index channels() const { return G.rows(); }
    Eigen::Index looks() const { return G.cols(); }
};

AcquisitionGeometry make_uniform_geometry(Eigen::Index n, double rho_s);

/// Grid of M points spaced `spacing` meters covering [-(M/2)·spacing, (M/2)·spacing).
ElevationGrid make_centered_grid(Eigen::Index m, double spacing);

/// Element n is exp(j·2π·ξₙ·s)/N.
CVector steering_vector(const AcquisitionGeometry& geometry, double s);

CMatrix steering_matrix(const AcquisitionGeometry& geometry, const ElevationGrid& grid);

/// Σ σ²ᵢ a(sᵢ)a(sᵢ)^H + σ²_w I.
CovarianceEstimate exact_covariance(const ScattererScene& scene, const AcquisitionGeometry& geometry,
                                    const ElevationGrid& grid);

SnapshotStack simulate_snapshots(const ScattererScene& scene, const AcquisitionGeometry& geometry,
                                 const ElevationGrid& grid, Eigen::Index looks, std::uint64_t seed,
                                 ReflectivityModel reflectivity = ReflectivityModel::gaussian);

/// k equal-power scatterers, neighbours separated by alpha Rayleigh cells
/// (rounded to whole grid steps, at least one), centered on the grid.
/// Per-scatterer power is noise_power·10^(snr_db/10).
ScattererScene make_spaced_scene(const ElevationGrid& grid, double rho_s, Eigen::Index k, double alpha,
                                 double snr_db, double noise_power = 1.0);

}  // namespace tomo
