#pragma once

#include "ctxcert/perturb.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ctxcert::cli {

// Exit codes shared by every subcommand.
enum ExitCode : int {
    kOk = 0,
    kConfigError = 1, // bad flags, unreadable inputs, unwritable output
    kEvalError = 2,   // failure while evaluating
    kInconclusive = 3 // verify could not tighten a bound to --tol
};

struct RunConfig {
    std::vector<std::filesystem::path> models;
    std::filesystem::path data;
    PerturbationKind perturbation = PerturbationKind::haze;
    HazeColor haze_color{1.0f, 1.0f, 1.0f};
    std::size_t kd = 2;
    double sigma_max = 2.0;
    double omega = 0.002;
    std::size_t grid = 101;
    double tol = 0.002;
    double delta_min = 1e-6;
    std::size_t workers = 0;
    std::filesystem::path out = "out";
    std::uint64_t seed = 0;

    // verify / counterexample selection
    std::vector<std::string> samples;
    std::optional<std::size_t> first_correct;
    double max_p = 1.0;

    // report / counterexample inputs; default to <out>/results.csv and <out>/certified.csv
    std::optional<std::filesystem::path> results;
    std::optional<std::filesystem::path> certified;
    std::vector<std::size_t> classes;

    PerturbationSpec spec() const;
    // Throws RangeError naming the offending flag.
    void validate() const;
    std::filesystem::path results_path() const;
    std::filesystem::path certified_path() const;
};

// Diagnostics go to `err`; `out` carries only the paths of written artifacts.
int cmd_eval(const RunConfig &config, std::ostream &out, std::ostream &err);
int cmd_verify(const RunConfig &config, std::ostream &out, std::ostream &err);
int cmd_report(const RunConfig &config, std::ostream &out, std::ostream &err);
int cmd_counterexample(const RunConfig &config, std::ostream &out, std::ostream &err);

// Full command line: `<prog> <eval|verify|report|counterexample> [flags]`.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

std::string sha256_file(const std::filesystem::path &path);

} // namespace ctxcert::cli
