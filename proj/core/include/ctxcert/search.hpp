#pragma once

#include "ctxcert/dataset.hpp"
#include "ctxcert/model.hpp"
#include "ctxcert/perturb.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ctxcert {

// Test-based robustness search: bisection on the perturbation level for the first
// classification flip along the probe path.

inline constexpr double kDefaultOmega = 0.002;

enum class IntervalStatus { misclassified_at_zero, flip_found, robust_full_range };

std::string_view to_string(IntervalStatus status);
IntervalStatus interval_status_from_string(std::string_view name);

struct RobustnessInterval {
    double eps_lower = 0.0;
    double eps_upper = 0.0;
    IntervalStatus status = IntervalStatus::misclassified_at_zero;
    std::size_t label_at_lower = 0;
    std::size_t label_at_upper = 0;
    // Midpoint evaluations performed (excludes the eps = 0 and eps = 1 checks).
    std::size_t midpoint_probes = 0;
};

// Returns [0,0] misclassified_at_zero when the clean image is wrong, [1,1] robust_full_range when
// eps = 1 and every probed midpoint classify correctly, and otherwise a flip_found bracket whose
// width is <= omega. Probing starts at the midpoint 0.5.
RobustnessInterval robustness_interval(const Model &model, const ImageSample &sample, const PerturbationSpec &spec,
                                       double omega = kDefaultOmega);

struct ResultEntry {
    std::string model_id;
    std::string sample_id;
    std::size_t true_label = 0;
    RobustnessInterval interval;
};

using ResultKey = std::pair<std::string, std::string>; // (model_id, sample_id)

struct ResultSet {
    std::map<ResultKey, ResultEntry> entries;
    PerturbationSpec perturbation;
    double omega = kDefaultOmega;

    std::vector<ResultEntry> for_model(const std::string &model_id) const;
    const ResultEntry *find(const std::string &model_id, const std::string &sample_id) const;
};

// One interval per (model, sample). The result does not depend on `workers`.
ResultSet evaluate_dataset(std::span<const Model> models, const Dataset &dataset, const PerturbationSpec &spec,
                           double omega = kDefaultOmega, std::size_t workers = 0);

struct Counterexample {
    std::string sample_id;
    double eps = 0.0;
    Tensor perturbed_image;
    std::size_t true_label = 0;
    std::size_t predicted_label = 0;
};

// Re-evaluates the evidence at eps_upper. robust_full_range has no counterexample. Throws
// InconsistencyError if the recorded flip no longer reproduces.
std::optional<Counterexample> generate_counterexample(const Model &model, const ImageSample &sample,
                                                      const RobustnessInterval &interval,
                                                      const PerturbationSpec &spec);

// Columns: model_id,sample_id,true_label,status,eps_lower,eps_upper,label_at_upper; sorted by key.
void write_result_set_csv(const ResultSet &results, const std::filesystem::path &path);
// Reads entries back; perturbation and omega are not part of the CSV and keep their defaults.
ResultSet read_result_set_csv(const std::filesystem::path &path);

} // namespace ctxcert
