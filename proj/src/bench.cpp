#include "tomosar/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "tomosar/metrics.hpp"

namespace tomo {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool needs_basis(const MethodSpec& m) {
    return m.covariance == CovMethod::corrsub_optimal || m.covariance == CovMethod::corrsub_suboptimal ||
           m.covariance == CovMethod::corrsub_simplified;
}

bool uses_covariance(DetectorKind d) {
    return d == DetectorKind::none || d == DetectorKind::music || d == DetectorKind::rap_music ||
           d == DetectorKind::rcc_music;
}

/// Shared per-sweep-point state, built once and read by all workers.
struct PointContext {
    ScenarioSetup setup;
    CMatrix A;
    CovarianceEstimate exact;
    std::optional<CorrelationSubspaceBasis> basis;
    std::string basis_error;
    std::vector<double> truth;
};

PointContext make_context(const ExperimentConfig& config, std::size_t sweep_index) {
    PointContext ctx{make_scenario(config, sweep_index), {}, {}, std::nullopt, {}, {}};
    ctx.A = steering_matrix(ctx.setup.geometry, ctx.setup.grid);
    ctx.exact = exact_covariance(ctx.setup.scene, ctx.setup.geometry, ctx.setup.grid);
    if (std::any_of(config.methods.begin(), config.methods.end(), needs_basis)) {
        try {
            ctx.basis = build_correlation_subspace(ctx.A);
        } catch (const Error& e) {
            ctx.basis_error = e.what();
        }
    }
    for (auto idx : ctx.setup.scene.indices) ctx.truth.push_back(ctx.setup.grid[idx]);
    std::sort(ctx.truth.begin(), ctx.truth.end());
    return ctx;
}

CovarianceEstimate post_process(const MethodSpec& m, const CovarianceEstimate& scm, const PointContext& ctx,
                                Eigen::Index k) {
    if (m.covariance == CovMethod::scm) return scm;
    if (m.covariance == CovMethod::exact) return ctx.exact;
    if (!ctx.basis) throw Error("correlation subspace unavailable: " + ctx.basis_error);
    switch (m.covariance) {
        case CovMethod::corrsub_suboptimal:
            return corrsub_suboptimal(scm, *ctx.basis, k, m.subtract_noise, m.enforce_psd);
        case CovMethod::corrsub_simplified: return corrsub_simplified(scm, *ctx.basis);
        case CovMethod::corrsub_optimal: {
            DykstraOptions opts = m.dykstra;
            opts.subtract_noise = m.subtract_noise;
            opts.enforce_psd = m.enforce_psd;
            return corrsub_optimal(scm, *ctx.basis, k, opts).estimate;
        }
        default: break;
    }
    return scm;
}

DetectionResult detect(const MethodSpec& m, const SnapshotStack& stack, const CovarianceEstimate& cov,
                       const PointContext& ctx, Eigen::Index k) {
    const auto& grid = ctx.setup.grid;
    switch (m.detector) {
        case DetectorKind::music: return classical_music(cov.R, ctx.A, grid, k);
        case DetectorKind::rap_music: return rap_music(cov.R, ctx.A, grid, k);
        case DetectorKind::rcc_music: return rcc_music(stack, cov.R, ctx.A, grid, k);
        case DetectorKind::sglrtc: return sglrtc(stack, ctx.A, grid, k);
        case DetectorKind::relax: return relax(stack, ctx.A, grid, k, m.relax);
        case DetectorKind::nls: return nls(stack, ctx.A, grid, k);
        case DetectorKind::none: break;
    }
    return {};
}

/// Order used by the detector for one trial.
Eigen::Index detection_order(const ExperimentConfig& config, const CovarianceEstimate& scm, Eigen::Index k_true,
                             Eigen::Index looks) {
    if (config.model_order == ModelOrderSource::truth) return k_true;
    const auto crit = config.model_order == ModelOrderSource::aic ? Criterion::aic : Criterion::mdl;
    return estimate_model_order(hermitian_eig(scm), looks, crit).k_hat;
}

struct MethodTrial {
    bool failed = false;
    bool resolved = false;
    TrialOutcome outcome;
    double subspace = 0.0;
    double runtime_ns = 0.0;
};

bool is_resolved(const DetectionResult& r, const std::vector<double>& truth) {
    if (r.degraded || r.elevations.size() != truth.size() || truth.empty()) return false;
    double min_sep = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < truth.size(); ++i) min_sep = std::min(min_sep, truth[i] - truth[i - 1]);
    const double half = truth.size() > 1 ? min_sep / 2.0 : std::numeric_limits<double>::infinity();
    auto est = r.elevations;
    std::sort(est.begin(), est.end());
    for (std::size_t i = 0; i < est.size(); ++i) {
        if (!(std::abs(est[i] - truth[i]) < half)) return false;
    }
    return true;
}

std::vector<MethodTrial> run_trial(const ExperimentConfig& config, const PointContext& ctx, std::uint64_t seed) {
    const auto& s = ctx.setup;
    const auto stack = simulate_snapshots(s.scene, s.geometry, s.grid, s.looks, seed, config.reflectivity);
    const auto scm = sample_covariance(stack);
    const double gate = config.gate * s.geometry.rho_s();
    std::vector<MethodTrial> out(config.methods.size());
    Eigen::Index k = s.scene.k();
    bool order_failed = false;
    try {
        k = detection_order(config, scm, s.scene.k(), s.looks);
    } catch (const Error&) {
        order_failed = true;
    }
    for (std::size_t i = 0; i < config.methods.size(); ++i) {
        const auto& m = config.methods[i];
        auto& t = out[i];
        t.outcome.true_elevations = ctx.truth;
        if (order_failed) {
            t.failed = true;
            continue;
        }
        try {
            const auto start = std::chrono::steady_clock::now();
            const auto cov = uses_covariance(m.detector) ? post_process(m, scm, ctx, s.scene.k() > 0 ? k : 0) : scm;
            DetectionResult r;
            if (m.detector != DetectorKind::none) {
                if (k < 1) {
                    r.degraded = true;
                } else {
                    r = detect(m, stack, cov, ctx, k);
                }
            }
            const auto stop = std::chrono::steady_clock::now();
            t.runtime_ns = static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count());
            if (config.subspace_distance && s.scene.k() > 0) {
                t.subspace = subspace_distance(ctx.exact, cov, s.scene.k());
            }
            if (m.detector != DetectorKind::none) {
                if (r.elevations.size() == ctx.truth.size()) {
                    t.outcome = match_estimates(r.elevations, ctx.truth, gate);
                } else {
                    t.outcome.estimated_elevations = r.elevations;
                }
                t.resolved = is_resolved(r, ctx.truth);
            }
        } catch (const Error&) {
            t.failed = true;
        } catch (const std::exception&) {
            t.failed = true;
        }
    }
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ResultRow aggregate(const ExperimentConfig& config, const PointContext& ctx, double sweep_value,
                    const MethodSpec& m, const std::vector<const MethodTrial*>& trials) {
    ResultRow row;
    row.sweep_value = sweep_value;
    row.method = m.method_name();
    row.covariance = m.covariance_name();
    std::vector<TrialOutcome> ok;
    std::vector<double> runtimes;
    double subspace_sum = 0.0;
    int resolved = 0;
    for (const auto* t : trials) {
        if (t->failed) {
            ++row.errors;
            continue;
        }
        ok.push_back(t->outcome);
        runtimes.push_back(t->runtime_ns);
        subspace_sum += t->subspace;
        if (t->resolved) ++resolved;
        if (t->outcome.detected) ++row.trials_detected;
    }
    const double n = static_cast<double>(trials.size());
    if (m.detector != DetectorKind::none) {
        const auto err = rmse(ok);
        if (err && row.trials_detected > 0) row.rmse_normalized = *err / ctx.setup.geometry.rho_s();
        row.detection_rate = row.trials_detected / n;
        row.resolution_rate = resolved / n;
    }
    if (config.subspace_distance && !ok.empty()) row.mean_subspace_distance = subspace_sum / static_cast<double>(ok.size());
    if (config.record_runtime && !runtimes.empty()) {
        double sum = 0.0;
        for (double r : runtimes) sum += r;
        row.mean_runtime_ns = sum / static_cast<double>(runtimes.size());
        row.median_runtime_ns = median(runtimes);
    }
    // Per-channel SNR of the simulated data: σ²_s·|a_n|²/σ²_w.
    const auto& scene = ctx.setup.scene;
    const double n_ch = static_cast<double>(ctx.setup.geometry.size());
    const double snr = scene.k() == 0 ? 0.0
                       : scene.noise_power > 0.0
                           ? scene.powers.front() / (n_ch * n_ch * scene.noise_power)
                           : std::numeric_limits<double>::infinity();
    const double rho = ctx.setup.geometry.rho_s();
    const auto looks = static_cast<double>(ctx.setup.looks);
    const auto antennas = static_cast<double>(ctx.setup.geometry.size());
    if (snr > 0.0) {
        row.sqrt_crlb_single = std::sqrt(crlb_single(rho, looks, antennas, snr)) / rho;
        row.sqrt_crlb_double = scene.k() >= 2 ? std::sqrt(crlb_double(rho, looks, antennas, snr, ctx.setup.alpha)) / rho
                                              : row.sqrt_crlb_single;
    }
    return row;
}

int worker_count(const ExperimentConfig& config) {
    if (config.workers > 0) return config.workers;
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

const std::vector<std::string>& result_columns() {
    static const std::vector<std::string> cols = {
        "sweep_value",      "method",          "covariance",        "rmse_normalized",  "detection_rate",
        "mean_subspace_distance", "mean_runtime_ns", "trials_detected", "errors",         "resolution_rate",
        "median_runtime_ns", "sqrt_crlb_single", "sqrt_crlb_double"};
    return cols;
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t sweep_index, std::size_t trial) {
    std::uint64_t h = splitmix64(master_seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(sweep_index));
    return splitmix64(h ^ (static_cast<std::uint64_t>(trial) * 0xd1b54a32d192ed03ULL));
}

std::size_t sweep_size(const ExperimentConfig& config) {
    return config.sweep == SweepKind::none ? 1 : config.sweep_values.size();
}

ScenarioSetup make_scenario(const ExperimentConfig& config, std::size_t sweep_index) {
    auto antennas = config.antennas;
    auto grid_points = config.grid_points;
    auto looks = config.looks;
    double snr_db = config.snr_db;
    double alpha = config.alpha;
    if (config.sweep != SweepKind::none) {
        if (sweep_index >= config.sweep_values.size()) throw InvalidArgument("sweep index out of range");
        const double v = config.sweep_values[sweep_index];
        switch (config.sweep) {
            case SweepKind::snr: snr_db = v; break;
            case SweepKind::alpha: alpha = v; break;
            case SweepKind::grid_size: grid_points = std::llround(v); break;
            case SweepKind::antennas: antennas = std::llround(v); break;
            case SweepKind::looks: looks = std::llround(v); break;
            case SweepKind::none: break;
        }
    }
    auto geometry = config.xi.empty()
                        ? make_uniform_geometry(antennas, config.rho_s)
                        : AcquisitionGeometry(Eigen::Map<const RVector>(config.xi.data(),
                                                                        static_cast<Eigen::Index>(config.xi.size())),
                                              config.rho_s);
    auto grid = make_centered_grid(grid_points, config.grid_spacing);
    const double offset_db =
        config.snr_convention == SnrConvention::array ? 10.0 * std::log10(static_cast<double>(geometry.size())) : 0.0;
    ScattererScene scene;
    if (config.indices.empty()) {
        scene = make_spaced_scene(grid, config.rho_s, config.k, alpha, snr_db + offset_db, config.noise_power);
    } else {
        scene.indices = config.indices;
        const double ref = config.noise_power > 0.0 ? config.noise_power : 1.0;
        scene.powers.assign(config.indices.size(), ref * std::pow(10.0, (snr_db + offset_db) / 10.0));
        scene.noise_power = config.noise_power;
        scene.validate(grid);
    }
    if (scene.k() >= 2) {
        std::vector<double> pos;
        for (auto i : scene.indices) pos.push_back(grid[i]);
        std::sort(pos.begin(), pos.end());
        double sep = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < pos.size(); ++i) sep = std::min(sep, pos[i] - pos[i - 1]);
        alpha = sep / config.rho_s;
    }
    return ScenarioSetup{std::move(geometry), std::move(grid), std::move(scene), looks, snr_db, alpha};
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto points = sweep_size(config);
    const auto trials = static_cast<std::size_t>(config.trials);
    std::vector<ResultRow> rows;
    for (std::size_t p = 0; p < points; ++p) {
        const PointContext ctx = make_context(config, p);
        std::vector<std::vector<MethodTrial>> results(trials);
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t t = next++; t < trials; t = next++) {
                results[t] = run_trial(config, ctx, trial_seed(config.master_seed, p, t));
            }
        };
        const int nworkers = std::min<int>(worker_count(config), static_cast<int>(trials));
        if (nworkers <= 1) {
            work();
        } else {
            std::vector<std::jthread> pool;
            for (int w = 0; w < nworkers; ++w) pool.emplace_back(work);
        }
        const double value = config.sweep == SweepKind::none ? 0.0 : config.sweep_values[p];
        for (std::size_t m = 0; m < config.methods.size(); ++m) {
            std::vector<const MethodTrial*> per_method;
            per_method.reserve(trials);
            for (const auto& r : results) per_method.push_back(&r[m]);
            rows.push_back(aggregate(config, ctx, value, config.methods[m], per_method));
        }
    }
    return rows;
}

std::string format_results(const std::vector<ResultRow>& rows, ResultFormat format) {
    if (format == ResultFormat::json) {
        json arr = json::array();
        for (const auto& r : rows) {
            json o;
            o["sweep_value"] = r.sweep_value;
            o["method"] = r.method;
            o["covariance"] = r.covariance;
            o["rmse_normalized"] = optional_json(r.rmse_normalized);
            o["detection_rate"] = r.detection_rate;
            o["mean_subspace_distance"] = optional_json(r.mean_subspace_distance);
            o["mean_runtime_ns"] = optional_json(r.mean_runtime_ns);
            o["trials_detected"] = r.trials_detected;
            o["errors"] = r.errors;
            o["resolution_rate"] = r.resolution_rate;
            o["median_runtime_ns"] = optional_json(r.median_runtime_ns);
            o["sqrt_crlb_single"] = r.sqrt_crlb_single;
            o["sqrt_crlb_double"] = r.sqrt_crlb_double;
            arr.push_back(std::move(o));
        }
        return arr.dump(2) + "\n";
    }
    std::ostringstream out;
    const auto& cols = result_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << "\n";
    for (const auto& r : rows) {
        out << format_double(r.sweep_value) << ',' << r.method << ',' << r.covariance << ','
            << format_optional(r.rmse_normalized) << ',' << format_double(r.detection_rate) << ','
            << format_optional(r.mean_subspace_distance) << ',' << format_optional(r.mean_runtime_ns) << ','
            << r.trials_detected << ',' << r.errors << ',' << format_double(r.resolution_rate) << ','
            << format_optional(r.median_runtime_ns) << ',' << format_double(r.sqrt_crlb_single) << ','
            << format_double(r.sqrt_crlb_double) << "\n";
    }
    return out.str();
}

void write_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path, ResultFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << format_results(rows, format);
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<ResultRow> read_results_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    json arr;
    try {
        arr = json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    std::vector<ResultRow> rows;
    for (const auto& o : arr) {
        ResultRow r;
        r.sweep_value = o.at("sweep_value").get<double>();
        r.method = o.at("method").get<std::string>();
        r.covariance = o.at("covariance").get<std::string>();
        r.rmse_normalized = optional_from(o, "rmse_normalized");
        r.detection_rate = o.at("detection_rate").get<double>();
        r.mean_subspace_distance = optional_from(o, "mean_subspace_distance");
        r.mean_runtime_ns = optional_from(o, "mean_runtime_ns");
        r.trials_detected = o.at("trials_detected").get<int>();
        r.errors = o.at("errors").get<int>();
        r.resolution_rate = o.at("resolution_rate").get<double>();
        r.median_runtime_ns = optional_from(o, "median_runtime_ns");
        r.sqrt_crlb_single = o.at("sqrt_crlb_single").get<double>();
        r.sqrt_crlb_double = o.at("sqrt_crlb_double").get<double>();
        rows.push_back(std::move(r));
    }
    return rows;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope fit needs at least two matched points");
    double mx = 0.0, my = 0.0;
    const auto n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("slope fit needs positive values");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (!(sxx > 0.0)) throw InvalidArgument("slope fit needs distinct x values");
    return sxy / sxx;
}

TimingReport run_timing_sweep(const ExperimentConfig& config) {
    std::vector<std::string> issues;
    if (config.sweep != SweepKind::grid_size && config.sweep != SweepKind::antennas) {
        issues.push_back("sweep: timing needs 'grid_size' or 'antennas'");
    }
    if (config.sweep_values.size() < 4) issues.push_back("sweep_values: timing needs at least 4 points");
    if (config.sweep == SweepKind::grid_size && !config.sweep_values.empty()) {
        const auto [lo, hi] = std::minmax_element(config.sweep_values.begin(), config.sweep_values.end());
        if (!(*hi >= 10.0 * *lo)) issues.push_back("sweep_values: grid sizes must span at least one decade");
    }
    if (!issues.empty()) throw ConfigError(std::move(issues));

    ExperimentConfig serial = config;
    serial.workers = 1;
    serial.record_runtime = true;
    TimingReport report;
    report.rows = run_experiment(serial);
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> series;
    std::vector<std::string> order;
    for (const auto& r : report.rows) {
        const auto key = r.method + "/" + r.covariance;
        if (!series.contains(key)) order.push_back(key);
        if (r.median_runtime_ns && *r.median_runtime_ns > 0.0) {
            series[key].first.push_back(r.sweep_value);
            series[key].second.push_back(*r.median_runtime_ns);
        }
    }
    for (const auto& key : order) {
        const auto& [x, y] = series[key];
        if (x.size() >= 2) report.slopes[key] = loglog_slope(x, y);
    }
    return report;
}

SpectrumRun run_single(const ExperimentConfig& config, const MethodSpec& method, std::uint64_t seed) {
    config.validate();
    if (method.detector == DetectorKind::none) throw InvalidArgument("spectrum needs a detector");
    ExperimentConfig single = config;
    single.methods = {method};
    const PointContext ctx = make_context(single, 0);
    const auto& s = ctx.setup;
    const auto stack = simulate_snapshots(s.scene, s.geometry, s.grid, s.looks, seed, single.reflectivity);
    const auto scm = sample_covariance(stack);
    const auto k = detection_order(single, scm, s.scene.k(), s.looks);
    if (k < 1) throw InvalidArgument("spectrum needs a nonzero model order");
    const auto cov = uses_covariance(method.detector) ? post_process(method, scm, ctx, k) : scm;
    return SpectrumRun{s, detect(method, stack, cov, ctx, k)};
}

}  // namespace tomo
