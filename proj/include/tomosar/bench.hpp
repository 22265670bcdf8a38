#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tomosar/covest.hpp"
#include "tomosar/detect.hpp"
#include "tomosar/model.hpp"

namespace tomo {

/// Raised for invalid experiment configurations. Each entry of `issues`
/// names the offending field path.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> issues);
    const std::vector<std::string>& issues() const { return issues_; }

private:
    std::vector<std::string> issues_;
};

/// How the configured SNR maps onto scatterer power.
enum class SnrConvention {
    /// σ²_s·‖a‖²/σ²_w: SNR after coherent integration over the N channels.
    array,
    /// σ²_s/σ²_w taken literally with 1/N-scaled steering vectors.
    reflectivity,
};

enum class SweepKind { none, snr, alpha, grid_size, antennas, looks };

enum class DetectorKind { none, music, rap_music, rcc_music, sglrtc, relax, nls };

enum class ModelOrderSource { truth, aic, mdl };

struct MethodSpec {
    DetectorKind detector = DetectorKind::rcc_music;
    CovMethod covariance = CovMethod::scm;
    bool subtract_noise = true;
    bool enforce_psd = true;
    DykstraOptions dykstra;
    RelaxOptions relax;
    std::string label;  ///< empty: derived from detector and covariance

    std::string method_name() const;
    std::string covariance_name() const;
};

struct ExperimentConfig {
    // geometry
    Eigen::Index antennas = 14;
    double rho_s = 26.0;
    std::vector<double> xi;  ///< optional explicit spatial frequencies
    // grid
    Eigen::Index grid_points = 234;
    double grid_spacing = 1.0;
    // scene
    Eigen::Index k = 2;
    double alpha = 0.5;
    std::vector<Eigen::Index> indices;  ///< optional explicit 0-based indices
    double snr_db = 10.0;
    double noise_power = 1.0;
    ReflectivityModel reflectivity = ReflectivityModel::gaussian;
    SnrConvention snr_convention = SnrConvention::array;
    // acquisition and Monte Carlo
    Eigen::Index looks = 25;
    int trials = 500;
    std::uint64_t master_seed = 1;
    std::vector<MethodSpec> methods;
    SweepKind sweep = SweepKind::none;
    std::vector<double> sweep_values;
    ModelOrderSource model_order = ModelOrderSource::truth;
    double gate = 1.0;  ///< detection gate in Rayleigh cells
    bool subspace_distance = false;
    bool record_runtime = false;
    int workers = 0;  ///< 0: hardware concurrency
    std::string output = "results.csv";
    std::string format = "csv";

    /// Throws ConfigError listing every problem found.
    void validate() const;
};

/// Parses a JSON document; missing fields keep their defaults. Unknown keys
/// are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies a dotted-path override such as "scene.alpha=0.5" to a JSON config.
/// Throws ConfigError naming the field when the path is unknown.
void apply_override(nlohmann::json& doc, const std::string& assignment);

std::string to_string(SweepKind kind);
std::string to_string(DetectorKind kind);
DetectorKind detector_from_string(const std::string& name);

/// One aggregated line of results.
struct ResultRow {
    double sweep_value = 0.0;
    std::string method;
    std::string covariance;
    std::optional<double> rmse_normalized;  ///< units of ρ_s
    double detection_rate = 0.0;
    std::optional<double> mean_subspace_distance;
    std::optional<double> mean_runtime_ns;
    int trials_detected = 0;
    int errors = 0;
    double resolution_rate = 0.0;
    std::optional<double> median_runtime_ns;
    double sqrt_crlb_single = 0.0;  ///< units of ρ_s
    double sqrt_crlb_double = 0.0;  ///< units of ρ_s

    bool operator==(const ResultRow&) const = default;
};

/// Column names, in file order.
const std::vector<std::string>& result_columns();

/// Seed for trial `trial` of sweep point `sweep_index`.
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t sweep_index, std::size_t trial);

/// Scene, geometry and grid for one sweep point.
struct ScenarioSetup {
    AcquisitionGeometry geometry;
    ElevationGrid grid;
    ScattererScene scene;
    Eigen::Index looks;
    double snr_db;
    double alpha;
};
ScenarioSetup make_scenario(const ExperimentConfig& config, std::size_t sweep_index);

/// Number of sweep points (1 when sweep is none).
std::size_t sweep_size(const ExperimentConfig& config);

std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

enum class ResultFormat { csv, json };

void write_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path, ResultFormat format);
std::string format_results(const std::vector<ResultRow>& rows, ResultFormat format);
std::vector<ResultRow> read_results_json(const std::filesystem::path& path);

struct TimingReport {
    std::vector<ResultRow> rows;
    /// Least-squares slope of log(median runtime) against log(sweep value),
    /// keyed by "method/covariance".
    std::map<std::string, double> slopes;
};

/// Runtime sweep over grid size or array size; runs serially and reports
/// median runtimes and fitted log-log slopes.
TimingReport run_timing_sweep(const ExperimentConfig& config);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Names of the built-in figure presets.
std::vector<std::string> preset_names();
/// Preset configuration as JSON. Throws ConfigError for unknown names.
nlohmann::json preset_json(const std::string& name);

/// Runs one trial and returns the detector result with its spectra.
struct SpectrumRun {
    ScenarioSetup setup;
    DetectionResult result;
};
SpectrumRun run_single(const ExperimentConfig& config, const MethodSpec& method, std::uint64_t seed);

}  // namespace tomo
