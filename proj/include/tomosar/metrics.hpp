#pragma once

#include <optional>
#include <span>
#include <vector>

namespace tomo {

/// Truth and estimates for one trial, paired after sorting both ascending.
struct TrialOutcome {
    std::vector<double> true_elevations;
    std::vector<double> estimated_elevations;
    bool detected = false;
};

/// Sorts both vectors, pairs them positionally and marks the trial detected
/// when every pairwise error is below `gate` (meters; one Rayleigh cell by
/// convention). Throws InvalidArgument on a length mismatch.
TrialOutcome match_estimates(std::span<const double> estimated, std::span<const double> truth, double gate);

/// Root of the mean, over detected trials, of the per-trial squared error
/// averaged across the k scatterers. Empty when no trial was detected.
std::optional<double> rmse(std::span<const TrialOutcome> outcomes);

/// Single-scatterer CRLB (m²): 3/(2π²)·ρ_s²/(L·N·SNR).
double crlb_single(double rho_s, double looks, double antennas, double snr_linear);

/// Normalized two-scatterer factor max{(15/π²)·α⁻², 1}.
double crlb_factor(double alpha);

/// crlb_single · crlb_factor(alpha).
double crlb_double(double rho_s, double looks, double antennas, double snr_linear, double alpha);

}  // namespace tomo
