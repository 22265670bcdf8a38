#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tomosar/bench.hpp"

namespace tomo::cli {

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kBadConfig = 2,
    kIoFailure = 3,
    kEstimatorFailure = 4,
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Spectrum dump: '#' comment lines with the true targets, then
/// iteration,index,elevation,value rows with 1-based iteration and index.
std::string format_spectrum(const SpectrumRun& run);

struct SelfCheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Oracle and invariant suite with fixed seeds. `fault` names a deliberate
/// corruption used to exercise the failure path; empty for none.
std::vector<SelfCheckResult> self_check(const std::string& fault = {});

}  // namespace tomo::cli
