#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "tomosar/model.hpp"

namespace tomo::testing {

/// Spatial frequencies spaced 1/(N·cell): steering vectors of targets a whole
/// number of `cell` metres apart are orthogonal.
inline AcquisitionGeometry orthogonal_geometry(Eigen::Index n, double cell) {
    RVector xi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        xi(i) = (static_cast<double>(i) - 0.5 * static_cast<double>(n - 1)) / (static_cast<double>(n) * cell);
    }
    return AcquisitionGeometry::from_frequencies(xi);
}

/// Reference steering entry, written independently of the library.
inline std::complex<double> steering_entry(double xi, double s, Eigen::Index n) {
    const double phase = 2.0 * std::numbers::pi * xi * s;
    return {std::cos(phase) / static_cast<double>(n), std::sin(phase) / static_cast<double>(n)};
}

inline double max_abs_diff(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace tomo::testing
