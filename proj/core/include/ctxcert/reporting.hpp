#pragma once

#include "ctxcert/certify.hpp"
#include "ctxcert/dataset.hpp"
#include "ctxcert/model.hpp"
#include "ctxcert/perturb.hpp"
#include "ctxcert/search.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctxcert {

inline constexpr std::size_t kDefaultGridPoints = 101;

// `points` values uniformly spaced over [0, 1], starting at exactly 0 and ending at exactly 1.
std::vector<double> uniform_grid(std::size_t points = kDefaultGridPoints);
// Throws RangeError unless the grid is non-empty, strictly ascending, inside [0,1] and starts at 0.
void validate_grid(std::span<const double> grid);

struct AccuracyCurve {
    std::string model_id;
    std::optional<std::size_t> class_filter;
    std::vector<double> eps_grid;
    std::vector<double> accuracy;
    std::vector<std::size_t> correct; // correctly classified samples per grid point
    std::size_t samples = 0;
};

// Accuracy evaluated directly at every grid level (never reconstructed from bisection intervals).
AccuracyCurve accuracy_curve(const Model &model, const Dataset &dataset, const PerturbationSpec &spec,
                             std::span<const double> eps_grid, std::size_t workers = 0);

struct ClassCurves {
    std::vector<AccuracyCurve> curves;       // ascending class index
    std::vector<std::size_t> skipped_classes; // requested classes with no samples
};

// One curve per class with at least one sample; `classes` restricts the output when non-empty.
ClassCurves class_accuracy_curves(const Model &model, const Dataset &dataset, const PerturbationSpec &spec,
                                  std::span<const double> eps_grid, std::size_t workers = 0,
                                  std::span<const std::size_t> classes = {});

// Linear interpolation between order statistics; `sorted` must be ascending and non-empty.
double quantile(std::span<const double> sorted, double q);

struct BoxSummary {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
    std::vector<double> outliers; // beyond 1.5 IQR from the quartiles
};

struct ClassEpsStats {
    std::size_t class_index = 0;
    std::optional<BoxSummary> summary; // empty when every entry is robust_full_range
    std::size_t n_flip = 0;
    std::size_t n_robust = 0;
    std::size_t n_misclassified_at_zero = 0;
};

struct EpsDistribution {
    std::string model_id;
    std::vector<ClassEpsStats> classes; // ascending class index
};

// Quartiles of eps_upper per true class. misclassified_at_zero entries contribute 0; robust entries are
// only counted.
EpsDistribution epsilon_distribution(const ResultSet &results, const std::string &model_id);

struct StripRow {
    std::size_t class_index = 0;
    std::string sample_id;
    std::optional<double> average_eps;
    std::filesystem::path original;
    std::optional<std::filesystem::path> perturbed;
};

struct CounterexampleStrip {
    std::vector<StripRow> rows;
    std::filesystem::path manifest;
};

// Per class: a representative original image and the same image perturbed at the class-average
// eps_upper, written as PPM files plus strip_<model>.csv. Paths in the manifest are relative.
CounterexampleStrip counterexample_strip(const Model &model, const Dataset &dataset, const ResultSet &results,
                                         const PerturbationSpec &spec, const std::filesystem::path &out_dir);

struct ComparisonRow {
    std::string model_id;
    std::string sample_id;
    std::optional<double> certified_adversarial_at;
    std::optional<double> tested_eps_upper;
    bool agree = false;
};

struct ComparisonTable {
    double tol = kDefaultTol;
    std::vector<ComparisonRow> rows; // sorted by (model_id, sample_id)
};

// Rows for every (model, sample) present in both inputs. A missing value means no adversarial
// level exists; two missing values agree. Throws FormatError if no keys match.
ComparisonTable comparison_table(std::span<const CertifiedEntry> certified, const ResultSet &tested);

struct Report {
    std::vector<AccuracyCurve> model_curves;
    std::map<std::string, std::vector<AccuracyCurve>> class_curves;
    std::vector<EpsDistribution> distributions;
    std::optional<ComparisonTable> comparison;
    std::vector<std::string> class_names; // optional legend labels
};

// Emits CSV files and one SVG chart per curve set. Returns the written paths in emission order.
std::vector<std::filesystem::path> write_report(const Report &report, const std::filesystem::path &out_dir);

// Model ids are used in file names; anything outside [A-Za-z0-9._-] becomes '_'.
std::string file_stem(const std::string &id);

} // namespace ctxcert
