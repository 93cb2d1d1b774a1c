#pragma once

#include "ctxcert/dataset.hpp"
#include "ctxcert/model.hpp"
#include "ctxcert/perturb.hpp"

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctxcert {

// Formal verification of haze robustness. Hazing moves every input pixel along the line
// x + eps * (C - x), so the network input is affine in the scalar eps. Bounds are tracked as
// linear functions of eps over an eps-interval and refined by splitting that interval.

inline constexpr double kDefaultDeltaMin = 1e-6;
inline constexpr double kDefaultTol = 0.002;

struct EpsSegment {
    Shape shape;
    std::vector<double> base;      // image at eps = 0
    std::vector<double> direction; // haze colour minus image, per element
    double lo = 0.0;
    double hi = 1.0;

    double value(std::size_t i, double eps) const { return base[i] + eps * direction[i]; }
    std::vector<double> at(double eps) const;
};

EpsSegment segment_from_haze(const Tensor &image, const HazeColor &haze_color, double lo, double hi);

// Lower and upper linear bounds in eps for one neuron.
struct LinearBound {
    double lower_slope = 0.0;
    double lower_intercept = 0.0;
    double upper_slope = 0.0;
    double upper_intercept = 0.0;

    double lower_at(double eps) const { return lower_slope * eps + lower_intercept; }
    double upper_at(double eps) const { return upper_slope * eps + upper_intercept; }
    // Concrete range over [lo, hi]: linear forms attain their extrema at the endpoints.
    double min_lower(double lo, double hi) const { return std::min(lower_at(lo), lower_at(hi)); }
    double max_upper(double lo, double hi) const { return std::max(upper_at(lo), upper_at(hi)); }

    static LinearBound exact(double slope, double intercept) { return {slope, intercept, slope, intercept}; }
};

struct EpsAffineForm {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<LinearBound> neurons;
};

LinearBound relax_relu(const LinearBound &pre, double lo, double hi);
EpsAffineForm relax_relu(const EpsAffineForm &pre);

// Bounds after every layer, in layer order.
std::vector<EpsAffineForm> propagate_layer_bounds(const Model &model, const EpsSegment &segment);
// Bounds on the logits.
EpsAffineForm propagate_bounds(const Model &model, const EpsSegment &segment);

// For each class j, a lower bound of (z_label - z_j) valid over the whole segment; +inf at
// j == label. When the last layer is dense the difference rows are formed before sign splitting.
std::vector<double> margin_lower_bounds(const Model &model, const EpsSegment &segment, std::size_t label);

enum class VerdictOutcome { robust, counterexample, unknown };
std::string_view to_string(VerdictOutcome outcome);

struct Verdict {
    VerdictOutcome outcome = VerdictOutcome::unknown;
    double counterexample_eps = std::numeric_limits<double>::quiet_NaN();
    std::size_t counterexample_label = 0;
    std::size_t subintervals_explored = 0;
    double unknown_mass = 0.0;
};

// Decides whether classification stays at sample.label for every eps in [0, p] under haze.
// Throws CleanMisclassification if the unperturbed sample is already wrong.
Verdict verify_haze(const Model &model, const ImageSample &sample, const HazeColor &haze_color, double p,
                    double delta_min = kDefaultDeltaMin);

enum class CertifyStatus { certified, robust_full_range, inconclusive };
std::string_view to_string(CertifyStatus status);

struct CertifiedBound {
    CertifyStatus status = CertifyStatus::inconclusive;
    double robust_up_to = 0.0;
    std::optional<double> adversarial_at;
    std::size_t adversarial_label = 0;
    double tol = kDefaultTol;
    double delta_min = kDefaultDeltaMin;
    std::size_t subintervals_explored = 0;
    std::size_t verifier_calls = 0;

    double gap() const
    {
        return adversarial_at ? *adversarial_at - robust_up_to : std::numeric_limits<double>::infinity();
    }
};

// Narrows [robust_up_to, adversarial_at] around the smallest adversarial haze level in [0, max_p].
// Status inconclusive means unknown verdicts stopped the search before the gap reached tol.
CertifiedBound min_adversarial_epsilon(const Model &model, const ImageSample &sample, const HazeColor &haze_color,
                                       double tol = kDefaultTol, double delta_min = kDefaultDeltaMin,
                                       double max_p = 1.0);

struct CertifiedEntry {
    std::string model_id;
    std::string sample_id;
    bool misclassified_at_zero = false;
    CertifiedBound bound;
};

// Columns: model_id,sample_id,outcome,robust_up_to,adversarial_at,tol,delta_min,subintervals_explored.
void write_certified_csv(const std::vector<CertifiedEntry> &entries, const std::filesystem::path &path);
std::vector<CertifiedEntry> read_certified_csv(const std::filesystem::path &path);

} // namespace ctxcert
