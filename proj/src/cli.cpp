#include "tomosar/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "tomosar/metrics.hpp"

namespace tomo::cli {

using nlohmann::json;

namespace {

/// Long options that take a value; any other `--key=value` is an override.
const std::set<std::string> kValueOptions = {"output", "format", "workers", "method", "covariance",
                                             "seed",   "criterion", "inject-fault"};

struct Split {
    std::vector<std::string> args;
    std::vector<std::string> overrides;
};

Split split_overrides(const std::vector<std::string>& in) {
    Split s;
    for (const auto& a : in) {
        const auto eq = a.find('=');
        if (eq != std::string::npos) {
            if (a.rfind("--", 0) == 0) {
                const auto key = a.substr(2, eq - 2);
                if (!kValueOptions.contains(key)) {
                    s.overrides.push_back(a.substr(2));
                    continue;
                }
            } else if (a[0] != '-') {
                s.overrides.push_back(a);
                continue;
            }
        }
        s.args.push_back(a);
    }
    return s;
}

json load_document(const std::string& source) {
    for (const auto& name : preset_names()) {
        if (name == source) return preset_json(name);
    }
    std::ifstream in(source);
    if (!in) throw ConfigError({"config: cannot read '" + source + "'"});
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError({"config: '" + source + "' is not valid JSON (" + e.what() + ")"});
    }
}

ExperimentConfig resolve_config(json doc, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) apply_override(doc, o);
    if (const char* env = std::getenv("TOMO_SEED")) {
        char* end = nullptr;
        const auto seed = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0') throw ConfigError({"TOMO_SEED: not an unsigned integer"});
        doc["master_seed"] = seed;
    }
    return config_from_json(doc);
}

struct Common {
    std::string output;
    std::string format;
    int workers = -1;
    bool to_stdout = false;
    bool verbose = false;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("-o,--output", c.output, "Output path");
    app->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    app->add_option("--workers", c.workers, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    app->add_flag("--stdout", c.to_stdout, "Write data to stdout");
    app->add_flag("-v,--verbose", c.verbose, "Diagnostics on stderr");
}

void apply_common(ExperimentConfig& cfg, const Common& c) {
    if (!c.output.empty()) cfg.output = c.output;
    if (!c.format.empty()) cfg.format = c.format;
    if (c.workers >= 0) cfg.workers = c.workers;
}

bool is_timing(const ExperimentConfig& cfg) {
    return cfg.record_runtime && (cfg.sweep == SweepKind::grid_size || cfg.sweep == SweepKind::antennas);
}

int execute(const ExperimentConfig& cfg, const Common& c, std::ostream& out, std::ostream& err) {
    if (c.verbose) {
        err << "running " << sweep_size(cfg) << " sweep point(s) x " << cfg.methods.size() << " method(s) x "
            << cfg.trials << " trial(s)\n";
    }
    std::vector<ResultRow> rows;
    if (is_timing(cfg)) {
        auto report = run_timing_sweep(cfg);
        rows = std::move(report.rows);
        for (const auto& [key, slope] : report.slopes) err << "slope " << key << " " << slope << "\n";
    } else {
        rows = run_experiment(cfg);
    }
    const auto format = cfg.format == "json" ? ResultFormat::json : ResultFormat::csv;
    if (c.to_stdout) {
        out << format_results(rows, format);
    } else {
        write_results(rows, cfg.output, format);
        if (c.verbose) err << "wrote " << cfg.output << "\n";
    }
    for (const auto& r : rows) {
        if (2 * r.errors > cfg.trials) {
            err << "estimator failures in " << r.errors << " of " << cfg.trials << " trials for " << r.method << "/"
                << r.covariance << " at sweep value " << r.sweep_value << "\n";
            return kEstimatorFailure;
        }
    }
    return kOk;
}

int print_order(const ExperimentConfig& cfg, const std::string& criterion, std::uint64_t seed, std::ostream& out) {
    const auto setup = make_scenario(cfg, 0);
    const auto stack =
        simulate_snapshots(setup.scene, setup.geometry, setup.grid, setup.looks, seed, cfg.reflectivity);
    const auto eigs = hermitian_eig(sample_covariance(stack));
    const auto crit = criterion == "aic" ? Criterion::aic : Criterion::mdl;
    const auto res = estimate_model_order(eigs, setup.looks, crit);
    out << "# criterion=" << to_string(crit) << " true_k=" << setup.scene.k() << " k_hat=" << res.k_hat << "\n";
    out << "k,value,eigenvalue\n";
    char buf[64];
    for (Eigen::Index k = 0; k < res.criterion_values.size(); ++k) {
        out << k << ',';
        std::snprintf(buf, sizeof buf, "%.10g", res.criterion_values(k));
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.10g", eigs.values(k));
        out << buf << "\n";
    }
    return kOk;
}

}  // namespace

std::string format_spectrum(const SpectrumRun& run) {
    std::ostringstream out;
    char buf[96];
    const auto& grid = run.setup.grid;
    for (auto idx : run.setup.scene.indices) {
        std::snprintf(buf, sizeof buf, "# target index=%lld elevation=%.10g\n", static_cast<long long>(idx + 1),
                      grid[idx]);
        out << buf;
    }
    for (std::size_t i = 0; i < run.result.elevations.size(); ++i) {
        std::snprintf(buf, sizeof buf, "# estimate index=%lld elevation=%.10g\n",
                      static_cast<long long>(run.result.omega[i] + 1), run.result.elevations[i]);
        out << buf;
    }
    out << "iteration,index,elevation,value\n";
    for (std::size_t it = 0; it < run.result.spectra.size(); ++it) {
        const auto& spec = run.result.spectra[it];
        for (Eigen::Index m = 0; m < spec.size(); ++m) {
            std::snprintf(buf, sizeof buf, "%zu,%lld,%.10g,%.10g\n", it + 1, static_cast<long long>(m + 1), grid[m],
                          spec(m));
            out << buf;
        }
    }
    return out.str();
}

int run(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
    const auto split = split_overrides(raw);

    CLI::App app{"Elevation estimation benchmarks for multi-baseline SAR tomography", "tomosar"};
    app.require_subcommand(1);

    Common common;
    std::string source;
    std::string method_name = "rcc_music";
    std::string covariance = "scm";
    std::string criterion = "mdl";
    std::string fault;
    std::optional<std::uint64_t> seed;
    std::string preset_action;
    std::string preset_name;

    auto* run_cmd = app.add_subcommand("run", "Run a Monte Carlo experiment from a JSON config");
    run_cmd->add_option("config", source, "Config file or preset name")->required();
    add_common(run_cmd, common);

    auto* preset_cmd = app.add_subcommand("preset", "List, show or run built-in figure presets");
    preset_cmd->add_option("action", preset_action, "list, show or run")
        ->required()
        ->check(CLI::IsMember({"list", "show", "run"}));
    preset_cmd->add_option("name", preset_name, "Preset name");
    add_common(preset_cmd, common);

    auto* spec_cmd = app.add_subcommand("spectrum", "Dump per-iteration spectra of one trial");
    spec_cmd->add_option("config", source, "Config file or preset name")->required();
    spec_cmd->add_option("--method", method_name, "Detector");
    spec_cmd->add_option("--covariance", covariance, "Covariance estimator");
    spec_cmd->add_option("--seed", seed, "Trial seed");
    add_common(spec_cmd, common);

    auto* check_cmd = app.add_subcommand("selfcheck", "Run the built-in oracle and invariant checks");
    check_cmd->add_option("--inject-fault", fault, "Deliberate corruption")->group("");

    auto* order_cmd = app.add_subcommand("order", "Estimate the number of scatterers for one trial");
    order_cmd->add_option("config", source, "Config file or preset name")->required();
    order_cmd->add_option("--criterion", criterion, "aic or mdl")->check(CLI::IsMember({"aic", "mdl"}));
    order_cmd->add_option("--seed", seed, "Trial seed");

    std::vector<std::string> reversed(split.args.rbegin(), split.args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (*check_cmd) {
            if (!split.overrides.empty()) throw ConfigError({"selfcheck: takes no overrides"});
            const auto results = self_check(fault);
            bool ok = true;
            for (const auto& r : results) {
                out << (r.passed ? "PASS " : "FAIL ") << r.name;
                if (!r.detail.empty()) out << ": " << r.detail;
                out << "\n";
                ok = ok && r.passed;
            }
            return ok ? kOk : kUsage;
        }
        if (*preset_cmd) {
            if (preset_action == "list") {
                for (const auto& n : preset_names()) out << n << "\n";
                return kOk;
            }
            if (preset_name.empty()) throw ConfigError({"preset: a preset name is required"});
            if (preset_action == "show") {
                auto doc = preset_json(preset_name);
                out << config_to_json(resolve_config(doc, split.overrides)).dump(2) << "\n";
                return kOk;
            }
            auto cfg = resolve_config(preset_json(preset_name), split.overrides);
            apply_common(cfg, common);
            return execute(cfg, common, out, err);
        }
        auto cfg = resolve_config(load_document(source), split.overrides);
        if (*run_cmd) {
            apply_common(cfg, common);
            return execute(cfg, common, out, err);
        }
        const auto trial = seed.value_or(trial_seed(cfg.master_seed, 0, 0));
        if (*order_cmd) return print_order(cfg, criterion, trial, out);

        MethodSpec method;
        method.detector = detector_from_string(method_name);
        method.covariance = cov_method_from_string(covariance);
        const auto text = format_spectrum(run_single(cfg, method, trial));
        if (common.to_stdout || common.output.empty()) {
            out << text;
        } else {
            std::ofstream f(common.output, std::ios::binary);
            if (!f) throw IoError("cannot open '" + common.output + "' for writing");
            f << text;
            if (!f) throw IoError("failed writing '" + common.output + "'");
        }
        return kOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kBadConfig;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIoFailure;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kBadConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kEstimatorFailure;
    }
}

}  // namespace tomo::cli
