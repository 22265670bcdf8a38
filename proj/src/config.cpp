#include <fstream>
#include <sstream>

#include "tomosar/bench.hpp"

namespace tomo {

using nlohmann::json;

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
    std::string out = "invalid configuration:";
    for (const auto& i : issues) out += "\n  " + i;
    return out;
}

const char* reflectivity_name(ReflectivityModel m) { return m == ReflectivityModel::gaussian ? "gaussian" : "deterministic"; }
const char* convention_name(SnrConvention c) { return c == SnrConvention::array ? "array" : "reflectivity"; }
const char* order_name(ModelOrderSource s) {
    switch (s) {
        case ModelOrderSource::truth: return "true";
        case ModelOrderSource::aic: return "aic";
        case ModelOrderSource::mdl: return "mdl";
    }
    return "true";
}

bool uses_covariance(DetectorKind d) {
    return d == DetectorKind::none || d == DetectorKind::music || d == DetectorKind::rap_music ||
           d == DetectorKind::rcc_music;
}

/// Reads optional typed fields from a JSON object and records problems
/// against their dotted path.
class Reader {
public:
    Reader(const json& obj, std::string prefix, std::vector<std::string>& issues)
        : obj_(obj), prefix_(std::move(prefix)), issues_(issues) {
        if (!obj_.is_object()) {
            issues_.push_back(path_of("") + ": expected an object");
            ok_ = false;
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (!ok_ || !obj_.contains(key)) return;
        try {
            out = obj_.at(key).get<T>();
        } catch (const json::exception&) {
            issues_.push_back(path_of(key) + ": wrong type");
        }
    }

    const json* child(const char* key) const {
        if (!ok_ || !obj_.contains(key)) return nullptr;
        return &obj_.at(key);
    }

    void reject_unknown(std::initializer_list<const char*> known) {
        if (!ok_) return;
        for (const auto& [key, value] : obj_.items()) {
            bool found = false;
            for (const char* k : known) found = found || key == k;
            if (!found) issues_.push_back(path_of(key.c_str()) + ": unknown field");
        }
    }

    std::string path_of(const char* key) const {
        if (prefix_.empty()) return key;
        if (*key == '\0') return prefix_;
        return prefix_ + "." + key;
    }

private:
    const json& obj_;
    std::string prefix_;
    std::vector<std::string>& issues_;
    bool ok_ = true;
};

MethodSpec method_from_json(const json& obj, const std::string& path, std::vector<std::string>& issues) {
    MethodSpec spec;
    Reader r(obj, path, issues);
    r.reject_unknown({"detector", "covariance", "options", "label"});
    std::string detector = "rcc_music";
    std::string covariance = "scm";
    r.get("detector", detector);
    r.get("covariance", covariance);
    r.get("label", spec.label);
    try {
        spec.detector = detector_from_string(detector);
    } catch (const Error&) {
        issues.push_back(path + ".detector: unknown detector '" + detector + "'");
    }
    try {
        spec.covariance = cov_method_from_string(covariance);
    } catch (const Error&) {
        issues.push_back(path + ".covariance: unknown covariance estimator '" + covariance + "'");
    }
    if (const json* opts = r.child("options")) {
        Reader o(*opts, path + ".options", issues);
        o.reject_unknown({"subtract_noise", "enforce_psd", "max_iter", "tol", "relax_tol", "relax_max_iter"});
        o.get("subtract_noise", spec.subtract_noise);
        o.get("enforce_psd", spec.enforce_psd);
        o.get("max_iter", spec.dykstra.max_iter);
        o.get("tol", spec.dykstra.tol);
        o.get("relax_tol", spec.relax.tol);
        o.get("relax_max_iter", spec.relax.max_iter);
    }
    spec.dykstra.subtract_noise = spec.subtract_noise;
    spec.dykstra.enforce_psd = spec.enforce_psd;
    return spec;
}

json method_to_json(const MethodSpec& m) {
    json j;
    j["detector"] = to_string(m.detector);
    j["covariance"] = to_string(m.covariance);
    j["options"] = {{"subtract_noise", m.subtract_noise},   {"enforce_psd", m.enforce_psd},
                    {"max_iter", m.dykstra.max_iter},       {"tol", m.dykstra.tol},
                    {"relax_tol", m.relax.tol},             {"relax_max_iter", m.relax.max_iter}};
    j["label"] = m.label;
    return j;
}

std::vector<MethodSpec> default_methods() {
    std::vector<MethodSpec> out;
    auto add = [&](DetectorKind d, CovMethod c) {
        MethodSpec m;
        m.detector = d;
        m.covariance = c;
        out.push_back(m);
    };
    add(DetectorKind::nls, CovMethod::scm);
    add(DetectorKind::rcc_music, CovMethod::scm);
    add(DetectorKind::rcc_music, CovMethod::corrsub_suboptimal);
    add(DetectorKind::rap_music, CovMethod::scm);
    add(DetectorKind::rap_music, CovMethod::corrsub_suboptimal);
    add(DetectorKind::sglrtc, CovMethod::scm);
    add(DetectorKind::relax, CovMethod::scm);
    return out;
}

json parse_override_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);
    }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues) : Error(join_issues(issues)), issues_(std::move(issues)) {}

std::string to_string(SweepKind kind) {
    switch (kind) {
        case SweepKind::none: return "none";
        case SweepKind::snr: return "snr";
        case SweepKind::alpha: return "alpha";
        case SweepKind::grid_size: return "grid_size";
        case SweepKind::antennas: return "antennas";
        case SweepKind::looks: return "looks";
    }
    return "none";
}

std::string to_string(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::none: return "none";
        case DetectorKind::music: return "music";
        case DetectorKind::rap_music: return "rap_music";
        case DetectorKind::rcc_music: return "rcc_music";
        case DetectorKind::sglrtc: return "sglrtc";
        case DetectorKind::relax: return "relax";
        case DetectorKind::nls: return "nls";
    }
    return "none";
}

DetectorKind detector_from_string(const std::string& name) {
    for (auto d : {DetectorKind::none, DetectorKind::music, DetectorKind::rap_music, DetectorKind::rcc_music,
                   DetectorKind::sglrtc, DetectorKind::relax, DetectorKind::nls}) {
        if (to_string(d) == name) return d;
    }
    throw InvalidArgument("unknown detector '" + name + "'");
}

std::string MethodSpec::method_name() const { return label.empty() ? to_string(detector) : label; }

std::string MethodSpec::covariance_name() const {
    if (!uses_covariance(detector)) return "snapshots";
    std::string name = to_string(covariance);
    const bool corrsub = covariance == CovMethod::corrsub_optimal || covariance == CovMethod::corrsub_suboptimal;
    if (corrsub && !subtract_noise) name += "+nc";
    if (corrsub && !enforce_psd) name += "+nopsd";
    return name;
}

void ExperimentConfig::validate() const {
    std::vector<std::string> issues;
    if (antennas < 2) issues.push_back("geometry.N: must be at least 2");
    if (!(rho_s > 0.0)) issues.push_back("geometry.rho_s: must be positive");
    if (!xi.empty()) {
        if (xi.size() < 2) issues.push_back("geometry.xi: needs at least two entries");
        for (std::size_t i = 1; i < xi.size(); ++i) {
            if (!(xi[i] > xi[i - 1])) {
                issues.push_back("geometry.xi: must be strictly increasing");
                break;
            }
        }
        if (sweep == SweepKind::antennas) issues.push_back("geometry.xi: cannot be combined with an antennas sweep");
    }
    if (grid_points < 2) issues.push_back("grid.M: must be at least 2");
    if (!(grid_spacing > 0.0)) issues.push_back("grid.spacing: must be positive");
    if (k < 0) issues.push_back("scene.k: must be nonnegative");
    if (k > 1 && indices.empty() && !(alpha > 0.0)) issues.push_back("scene.alpha: must be positive");
    if (!indices.empty() && static_cast<Eigen::Index>(indices.size()) != k) {
        issues.push_back("scene.indices: length must equal scene.k");
    }
    for (auto idx : indices) {
        if (idx < 0 || idx >= grid_points) issues.push_back("scene.indices: index outside the grid");
    }
    if (!(noise_power >= 0.0)) issues.push_back("scene.noise_power: must be nonnegative");
    if (looks < 1) issues.push_back("L: must be at least 1");
    if (trials < 1) issues.push_back("trials: must be at least 1");
    if (!(gate > 0.0)) issues.push_back("gate: must be positive");
    if (workers < 0) issues.push_back("workers: must be nonnegative");
    if (sweep != SweepKind::none && sweep_values.empty()) issues.push_back("sweep_values: required when sweep is set");
    if (methods.empty()) issues.push_back("methods: at least one method is required");
    for (std::size_t i = 0; i < methods.size(); ++i) {
        const auto& m = methods[i];
        const std::string p = "methods[" + std::to_string(i) + "]";
        if (m.detector == DetectorKind::none && !subspace_distance) {
            issues.push_back(p + ".detector: 'none' requires subspace_distance");
        }
        if (m.detector == DetectorKind::nls && k > 2) issues.push_back(p + ".detector: nls supports k <= 2");
        if (m.detector != DetectorKind::none && k < 1) issues.push_back(p + ".detector: detectors need scene.k >= 1");
        if (m.dykstra.max_iter < 1) issues.push_back(p + ".options.max_iter: must be at least 1");
        if (m.relax.max_iter < 1) issues.push_back(p + ".options.relax_max_iter: must be at least 1");
    }
    for (double v : sweep_values) {
        switch (sweep) {
            case SweepKind::alpha:
                if (!(v > 0.0)) issues.push_back("sweep_values: alpha values must be positive");
                break;
            case SweepKind::grid_size:
                if (v < 2.0) issues.push_back("sweep_values: grid sizes must be at least 2");
                break;
            case SweepKind::antennas:
                if (v < 2.0) issues.push_back("sweep_values: antenna counts must be at least 2");
                break;
            case SweepKind::looks:
                if (v < 1.0) issues.push_back("sweep_values: look counts must be at least 1");
                break;
            default: break;
        }
    }
    if (format != "csv" && format != "json") issues.push_back("output.format: must be 'csv' or 'json'");
    if (!issues.empty()) throw ConfigError(std::move(issues));
}

ExperimentConfig config_from_json(const json& doc) {
    ExperimentConfig cfg;
    std::vector<std::string> issues;
    Reader top(doc, "", issues);
    top.reject_unknown({"geometry", "grid", "scene", "L", "trials", "master_seed", "methods", "sweep", "sweep_values",
                        "model_order", "gate", "subspace_distance", "record_runtime", "workers", "output"});

    if (const json* g = top.child("geometry")) {
        Reader r(*g, "geometry", issues);
        r.reject_unknown({"N", "rho_s", "xi"});
        r.get("N", cfg.antennas);
        r.get("rho_s", cfg.rho_s);
        r.get("xi", cfg.xi);
        if (!cfg.xi.empty() && !g->contains("N")) cfg.antennas = static_cast<Eigen::Index>(cfg.xi.size());
        if (!cfg.xi.empty() && static_cast<Eigen::Index>(cfg.xi.size()) != cfg.antennas) {
            issues.push_back("geometry.xi: length must equal geometry.N");
        }
    }
    if (const json* g = top.child("grid")) {
        Reader r(*g, "grid", issues);
        r.reject_unknown({"M", "spacing"});
        r.get("M", cfg.grid_points);
        r.get("spacing", cfg.grid_spacing);
    }

    std::vector<double> snr_list;
    if (const json* s = top.child("scene")) {
        Reader r(*s, "scene", issues);
        r.reject_unknown({"k", "alpha", "indices", "snr_db", "noise_power", "reflectivity", "snr_convention"});
        r.get("k", cfg.k);
        r.get("alpha", cfg.alpha);
        std::vector<Eigen::Index> one_based;
        r.get("indices", one_based);
        for (auto i : one_based) cfg.indices.push_back(i - 1);
        if (!one_based.empty() && !s->contains("k")) cfg.k = static_cast<Eigen::Index>(one_based.size());
        if (const json* snr = r.child("snr_db")) {
            if (snr->is_array()) {
                r.get("snr_db", snr_list);
                if (snr_list.empty()) issues.push_back("scene.snr_db: must not be empty");
                else cfg.snr_db = snr_list.front();
            } else {
                r.get("snr_db", cfg.snr_db);
            }
        }
        r.get("noise_power", cfg.noise_power);
        std::string refl = reflectivity_name(cfg.reflectivity);
        r.get("reflectivity", refl);
        if (refl == "gaussian") cfg.reflectivity = ReflectivityModel::gaussian;
        else if (refl == "deterministic") cfg.reflectivity = ReflectivityModel::deterministic;
        else issues.push_back("scene.reflectivity: must be 'gaussian' or 'deterministic'");
        std::string conv = convention_name(cfg.snr_convention);
        r.get("snr_convention", conv);
        if (conv == "array") cfg.snr_convention = SnrConvention::array;
        else if (conv == "reflectivity") cfg.snr_convention = SnrConvention::reflectivity;
        else issues.push_back("scene.snr_convention: must be 'array' or 'reflectivity'");
    }

    top.get("L", cfg.looks);
    top.get("trials", cfg.trials);
    top.get("master_seed", cfg.master_seed);
    top.get("gate", cfg.gate);
    top.get("subspace_distance", cfg.subspace_distance);
    top.get("record_runtime", cfg.record_runtime);
    top.get("workers", cfg.workers);

    std::string sweep = "none";
    top.get("sweep", sweep);
    bool sweep_ok = false;
    for (auto kind : {SweepKind::none, SweepKind::snr, SweepKind::alpha, SweepKind::grid_size, SweepKind::antennas,
                      SweepKind::looks}) {
        if (to_string(kind) == sweep) {
            cfg.sweep = kind;
            sweep_ok = true;
        }
    }
    if (!sweep_ok) issues.push_back("sweep: unknown sweep '" + sweep + "'");
    top.get("sweep_values", cfg.sweep_values);
    if (cfg.sweep == SweepKind::snr && cfg.sweep_values.empty() && !snr_list.empty()) cfg.sweep_values = snr_list;
    if (snr_list.size() > 1 && cfg.sweep != SweepKind::snr) {
        issues.push_back("scene.snr_db: a list of SNRs requires sweep = 'snr'");
    }

    std::string order = "true";
    top.get("model_order", order);
    if (order == "true") cfg.model_order = ModelOrderSource::truth;
    else if (order == "aic") cfg.model_order = ModelOrderSource::aic;
    else if (order == "mdl") cfg.model_order = ModelOrderSource::mdl;
    else issues.push_back("model_order: must be 'true', 'aic' or 'mdl'");

    if (const json* m = top.child("methods")) {
        if (!m->is_array()) {
            issues.push_back("methods: expected an array");
        } else {
            for (std::size_t i = 0; i < m->size(); ++i) {
                cfg.methods.push_back(method_from_json((*m)[i], "methods[" + std::to_string(i) + "]", issues));
            }
        }
    } else {
        cfg.methods = default_methods();
    }

    if (const json* o = top.child("output")) {
        Reader r(*o, "output", issues);
        r.reject_unknown({"path", "format"});
        r.get("path", cfg.output);
        r.get("format", cfg.format);
    }

    if (!issues.empty()) throw ConfigError(std::move(issues));
    cfg.validate();
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["geometry"] = {{"N", cfg.antennas}, {"rho_s", cfg.rho_s}};
    if (!cfg.xi.empty()) j["geometry"]["xi"] = cfg.xi;
    j["grid"] = {{"M", cfg.grid_points}, {"spacing", cfg.grid_spacing}};
    j["scene"] = {{"k", cfg.k},
                  {"alpha", cfg.alpha},
                  {"snr_db", cfg.snr_db},
                  {"noise_power", cfg.noise_power},
                  {"reflectivity", reflectivity_name(cfg.reflectivity)},
                  {"snr_convention", convention_name(cfg.snr_convention)}};
    if (!cfg.indices.empty()) {
        std::vector<Eigen::Index> one_based;
        for (auto i : cfg.indices) one_based.push_back(i + 1);
        j["scene"]["indices"] = one_based;
    }
    j["L"] = cfg.looks;
    j["trials"] = cfg.trials;
    j["master_seed"] = cfg.master_seed;
    j["methods"] = json::array();
    for (const auto& m : cfg.methods) j["methods"].push_back(method_to_json(m));
    j["sweep"] = to_string(cfg.sweep);
    j["sweep_values"] = cfg.sweep_values;
    j["model_order"] = order_name(cfg.model_order);
    j["gate"] = cfg.gate;
    j["subspace_distance"] = cfg.subspace_distance;
    j["record_runtime"] = cfg.record_runtime;
    j["workers"] = cfg.workers;
    j["output"] = {{"path", cfg.output}, {"format", cfg.format}};
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"config: cannot read '" + path.string() + "'"});
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError({"config: '" + path.string() + "' is not valid JSON (" + e.what() + ")"});
    }
    return config_from_json(doc);
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError({"override '" + assignment + "': expected key=value"});
    const std::string key = assignment.substr(0, eq);
    const json value = parse_override_value(assignment.substr(eq + 1));

    // Resolve against a fully populated document so every known field exists.
    const json full = config_to_json(config_from_json(doc));
    const json* node = &full;
    json* target = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto& p = parts[i];
        if (!node->is_object() || !node->contains(p)) throw ConfigError({key + ": unknown field"});
        node = &node->at(p);
        if (i + 1 == parts.size()) {
            (*target)[p] = value;
        } else {
            if (!target->contains(p) || !(*target)[p].is_object()) (*target)[p] = json::object();
            target = &(*target)[p];
        }
    }
}

}  // namespace tomo
