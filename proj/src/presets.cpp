#include <cmath>

#include "tomosar/bench.hpp"

namespace tomo {

using nlohmann::json;

namespace {

json method(const char* detector, const char* covariance, json options = json::object(), const char* label = "") {
    json m{{"detector", detector}, {"covariance", covariance}};
    if (!options.empty()) m["options"] = std::move(options);
    if (*label != '\0') m["label"] = label;
    return m;
}

std::vector<double> range(double lo, double hi, double step) {
    std::vector<double> out;
    for (double v = lo; v <= hi + 1e-9; v += step) out.push_back(std::round(v * 1e6) / 1e6);
    return out;
}

json sequential_methods() {
    return json::array({method("nls", "scm"), method("rcc_music", "scm"), method("rcc_music", "corrsub_suboptimal"),
                        method("rap_music", "scm"), method("rap_music", "corrsub_suboptimal"),
                        method("sglrtc", "scm"), method("relax", "scm")});
}

json covariance_variants(bool with_psd_split) {
    json arr = json::array({method("none", "scm"), method("none", "corrsub_suboptimal"),
                            method("none", "corrsub_suboptimal", {{"subtract_noise", false}})});
    arr.push_back(method("none", "corrsub_optimal"));
    if (with_psd_split) arr.push_back(method("none", "corrsub_optimal", {{"enforce_psd", false}}));
    return arr;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig7nls", "fig7n", "fig8", "fig9"};
}

json preset_json(const std::string& name) {
    json j;
    if (name == "fig2") {
        j["scene"] = {{"k", 2}, {"alpha", 0.7}, {"snr_db", 0.0}};
        j["trials"] = 200;
        j["methods"] = json::array({method("music", "scm"), method("music", "corrsub_suboptimal")});
        j["output"] = {{"path", "fig2.csv"}};
    } else if (name == "fig3") {
        j["scene"] = {{"k", 2}, {"alpha", 0.5}, {"snr_db", 14.0}};
        j["trials"] = 500;
        j["methods"] = json::array({method("rap_music", "scm"), method("rcc_music", "scm")});
        j["output"] = {{"path", "fig3.csv"}};
    } else if (name == "fig4") {
        j["scene"] = {{"k", 2}, {"alpha", 0.3}, {"snr_db", 8.0}};
        j["trials"] = 500;
        j["methods"] = json::array({method("rap_music", "scm"), method("rcc_music", "scm")});
        j["output"] = {{"path", "fig4.csv"}};
    } else if (name == "fig5") {
        j["scene"] = {{"k", 2}, {"alpha", 0.5}};
        j["sweep"] = "snr";
        j["sweep_values"] = range(6.0, 20.0, 2.0);
        j["methods"] = sequential_methods();
        j["output"] = {{"path", "fig5.csv"}};
    } else if (name == "fig6") {
        j["scene"] = {{"k", 2}, {"snr_db", 9.0}};
        j["sweep"] = "alpha";
        j["sweep_values"] = range(0.3, 1.2, 0.1);
        j["methods"] = sequential_methods();
        j["output"] = {{"path", "fig6.csv"}};
    } else if (name == "fig7") {
        j["scene"] = {{"k", 2}, {"alpha", 0.5}, {"snr_db", 10.0}};
        j["trials"] = 7;
        j["sweep"] = "grid_size";
        j["sweep_values"] = {1000, 2000, 4000, 8000, 16000, 32000};
        j["record_runtime"] = true;
        j["workers"] = 1;
        j["methods"] = json::array({method("rcc_music", "scm"), method("rcc_music", "corrsub_suboptimal"),
                                    method("rap_music", "scm"), method("rap_music", "corrsub_suboptimal"),
                                    method("sglrtc", "scm"), method("relax", "scm")});
        j["output"] = {{"path", "fig7.csv"}};
    } else if (name == "fig7nls") {
        j["scene"] = {{"k", 2}, {"alpha", 0.5}, {"snr_db", 10.0}};
        j["trials"] = 5;
        j["sweep"] = "grid_size";
        j["sweep_values"] = {200, 400, 800, 1600, 3200};
        j["record_runtime"] = true;
        j["workers"] = 1;
        j["methods"] = json::array({method("nls", "scm")});
        j["output"] = {{"path", "fig7nls.csv"}};
    } else if (name == "fig7n") {
        j["scene"] = {{"k", 2}, {"alpha", 0.5}, {"snr_db", 10.0}};
        j["trials"] = 20;
        j["sweep"] = "antennas";
        j["sweep_values"] = {8, 12, 16, 24, 32};
        j["grid"] = {{"M", 800}};
        j["record_runtime"] = true;
        j["workers"] = 1;
        j["methods"] = json::array({method("rcc_music", "scm"), method("rcc_music", "corrsub_suboptimal"),
                                    method("rap_music", "scm"), method("rap_music", "corrsub_suboptimal")});
        j["output"] = {{"path", "fig7n.csv"}};
    } else if (name == "fig8") {
        j["scene"] = {{"k", 2}, {"alpha", 0.5}, {"snr_db", -6.0}};
        j["trials"] = 300;
        j["sweep"] = "looks";
        j["sweep_values"] = range(10.0, 100.0, 10.0);
        j["subspace_distance"] = true;
        j["methods"] = covariance_variants(false);
        j["output"] = {{"path", "fig8.csv"}};
    } else if (name == "fig9") {
        j["scene"] = {{"k", 2}, {"alpha", 0.5}, {"snr_db", -6.0}};
        j["trials"] = 300;
        j["sweep"] = "looks";
        j["sweep_values"] = range(10.0, 100.0, 10.0);
        j["subspace_distance"] = true;
        j["methods"] = covariance_variants(true);
        j["output"] = {{"path", "fig9.csv"}};
    } else {
        throw ConfigError({"preset: unknown preset '" + name + "'"});
    }
    return j;
}

}  // namespace tomo
