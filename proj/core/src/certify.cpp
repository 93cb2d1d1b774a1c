#include "ctxcert/certify.hpp"

#include "ctxcert/csv.hpp"
#include "ctxcert/error.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <utility>

namespace ctxcert {

namespace {

// Width below which the concrete flip refinement inside a counterexample interval stops.
constexpr double kRefineWidth = 1e-12;

std::vector<LinearBound> affine_bounds(const Layer &layer, const std::vector<LinearBound> &in)
{
    const std::size_t out_size = shape_size(layer.out_shape);
    std::vector<LinearBound> out(out_size);
    for (std::size_t o = 0; o < out_size; ++o) {
        const double b = bias_of(layer, o);
        out[o] = LinearBound::exact(0.0, b);
    }
    visit_connections(layer, [&](std::size_t o, std::size_t i, float wf) {
        const double w = wf;
        const LinearBound &src = in[i];
        LinearBound &dst = out[o];
        if (w >= 0.0) {
            dst.lower_slope += w * src.lower_slope;
            dst.lower_intercept += w * src.lower_intercept;
            dst.upper_slope += w * src.upper_slope;
            dst.upper_intercept += w * src.upper_intercept;
        } else {
            dst.lower_slope += w * src.upper_slope;
            dst.lower_intercept += w * src.upper_intercept;
            dst.upper_slope += w * src.lower_slope;
            dst.upper_intercept += w * src.lower_intercept;
        }
    });
    return out;
}

EpsAffineForm input_form(const Model &model, const EpsSegment &segment)
{
    if (segment.shape != model.input_shape())
        throw ShapeError("segment shape " + shape_to_string(segment.shape) + " does not match model '" + model.id() +
                         "' input " + shape_to_string(model.input_shape()));
    EpsAffineForm form;
    form.lo = segment.lo;
    form.hi = segment.hi;
    form.neurons.resize(segment.base.size());
    for (std::size_t i = 0; i < segment.base.size(); ++i)
        form.neurons[i] = LinearBound::exact(segment.direction[i], segment.base[i]);
    return form;
}

EpsAffineForm apply_layer(const Layer &layer, EpsAffineForm form)
{
    switch (layer.kind) {
    case LayerKind::dense:
    case LayerKind::conv2d:
        form.neurons = affine_bounds(layer, form.neurons);
        return form;
    case LayerKind::relu:
        return relax_relu(form);
    case LayerKind::flatten:
        return form;
    }
    throw Error("unsupported layer kind in bound propagation");
}

} // namespace

std::vector<double> EpsSegment::at(double eps) const
{
    std::vector<double> out(base.size());
    for (std::size_t i = 0; i < base.size(); ++i)
        out[i] = value(i, eps);
    return out;
}

EpsSegment segment_from_haze(const Tensor &image, const HazeColor &haze_color, double lo, double hi)
{
    if (!(lo <= hi))
        throw_range("segment_from_haze: lo > hi");
    if (!(lo >= 0.0 && hi <= 1.0))
        throw_range("segment_from_haze: interval outside [0, 1]");
    if (image.rank() != 3)
        throw ShapeError("segment_from_haze: image must be H x W x C");

    EpsSegment segment;
    segment.shape = image.shape();
    segment.lo = lo;
    segment.hi = hi;
    segment.base.resize(image.size());
    segment.direction.resize(image.size());
    const std::size_t channels = image.dim(2);
    for (std::size_t i = 0; i < image.size(); ++i) {
        segment.base[i] = image[i];
        segment.direction[i] = static_cast<double>(haze_component(haze_color, i % channels)) - image[i];
    }
    return segment;
}

LinearBound relax_relu(const LinearBound &pre, double lo, double hi)
{
    const double m = pre.min_lower(lo, hi);
    const double big_m = pre.max_upper(lo, hi);
    if (m >= 0.0)
        return pre;
    if (big_m <= 0.0)
        return LinearBound{};

    // Chord through (m, 0) and (M, M), applied to the upper form.
    const double lambda = big_m / (big_m - m);
    LinearBound post;
    post.upper_slope = lambda * pre.upper_slope;
    post.upper_intercept = lambda * pre.upper_intercept - lambda * m;
    if (std::abs(big_m) >= std::abs(m)) {
        post.lower_slope = pre.lower_slope;
        post.lower_intercept = pre.lower_intercept;
    }
    return post;
}

EpsAffineForm relax_relu(const EpsAffineForm &pre)
{
    EpsAffineForm post;
    post.lo = pre.lo;
    post.hi = pre.hi;
    post.neurons.reserve(pre.neurons.size());
    for (const auto &n : pre.neurons)
        post.neurons.push_back(relax_relu(n, pre.lo, pre.hi));
    return post;
}

std::vector<EpsAffineForm> propagate_layer_bounds(const Model &model, const EpsSegment &segment)
{
    std::vector<EpsAffineForm> forms;
    forms.reserve(model.layers().size());
    EpsAffineForm current = input_form(model, segment);
    for (const Layer &layer : model.layers()) {
        current = apply_layer(layer, std::move(current));
        forms.push_back(current);
    }
    return forms;
}

EpsAffineForm propagate_bounds(const Model &model, const EpsSegment &segment)
{
    EpsAffineForm current = input_form(model, segment);
    for (const Layer &layer : model.layers())
        current = apply_layer(layer, std::move(current));
    return current;
}

std::vector<double> margin_lower_bounds(const Model &model, const EpsSegment &segment, std::size_t label)
{
    const std::size_t classes = model.num_classes();
    if (label >= classes)
        throw_range("margin_lower_bounds: label out of range");
    const double lo = segment.lo, hi = segment.hi;
    std::vector<double> margins(classes, std::numeric_limits<double>::infinity());

    const Layer &last = model.layers().back();
    if (last.kind != LayerKind::dense) {
        const EpsAffineForm out = propagate_bounds(model, segment);
        const LinearBound &y = out.neurons[label];
        for (std::size_t j = 0; j < classes; ++j) {
            if (j == label)
                continue;
            const LinearBound &other = out.neurons[j];
            const double slope = y.lower_slope - other.upper_slope;
            const double intercept = y.lower_intercept - other.upper_intercept;
            margins[j] = std::min(slope * lo + intercept, slope * hi + intercept);
        }
        return margins;
    }

    EpsAffineForm hidden = input_form(model, segment);
    for (std::size_t li = 0; li + 1 < model.layers().size(); ++li)
        hidden = apply_layer(model.layers()[li], std::move(hidden));

    const std::size_t width = last.weights.dim(1);
    const float *w = last.weights.data().data();
    for (std::size_t j = 0; j < classes; ++j) {
        if (j == label)
            continue;
        double slope = 0.0;
        double intercept = static_cast<double>(last.bias[label]) - static_cast<double>(last.bias[j]);
        for (std::size_t i = 0; i < width; ++i) {
            const double d = static_cast<double>(w[label * width + i]) - static_cast<double>(w[j * width + i]);
            const LinearBound &h = hidden.neurons[i];
            if (d >= 0.0) {
                slope += d * h.lower_slope;
                intercept += d * h.lower_intercept;
            } else {
                slope += d * h.upper_slope;
                intercept += d * h.upper_intercept;
            }
        }
        margins[j] = std::min(slope * lo + intercept, slope * hi + intercept);
    }
    return margins;
}

std::string_view to_string(VerdictOutcome outcome)
{
    switch (outcome) {
    case VerdictOutcome::robust:
        return "robust";
    case VerdictOutcome::counterexample:
        return "counterexample";
    case VerdictOutcome::unknown:
        return "unknown";
    }
    return "?";
}

Verdict verify_haze(const Model &model, const ImageSample &sample, const HazeColor &haze_color, double p,
                    double delta_min)
{
    if (!(p > 0.0 && p <= 1.0))
        throw_range("verify_haze: p must lie in (0, 1]");
    if (!(delta_min > 0.0))
        throw_range("verify_haze: delta_min must be positive");

    auto label_at = [&](double eps) { return classify(model, apply_haze(sample.image, eps, haze_color)); };
    if (label_at(0.0) != sample.label)
        throw CleanMisclassification("sample '" + sample.sample_id + "' is misclassified by model '" + model.id() +
                                     "' without perturbation");

    EpsSegment segment = segment_from_haze(sample.image, haze_color, 0.0, p);
    Verdict verdict;

    // Bisect concretely between a correct level and a misclassified one. The returned level is
    // re-checked before it is reported.
    auto counterexample = [&](double good, double bad, std::size_t bad_label) {
        while (bad - good > kRefineWidth) {
            const double mid = good + 0.5 * (bad - good);
            if (mid <= good || mid >= bad)
                break;
            const std::size_t label = label_at(mid);
            if (label == sample.label) {
                good = mid;
            } else {
                bad = mid;
                bad_label = label;
            }
        }
        if (label_at(bad) == sample.label)
            throw InconsistencyError("counterexample at eps " + csv::format_double(bad) + " does not reproduce");
        verdict.outcome = VerdictOutcome::counterexample;
        verdict.counterexample_eps = bad;
        verdict.counterexample_label = bad_label;
        return verdict;
    };

    // Depth-first, leftmost subinterval first: when a subinterval is popped everything to its left
    // is already verified or set aside, so the first counterexample found is the leftmost one.
    // Every endpoint except p itself was classified correctly by an ancestor, so only midpoints
    // need a fresh evaluation. If p is misclassified, the subintervals ending at p are never
    // verifiable and are split until they are narrower than delta_min.
    const std::size_t label_at_p = label_at(p);
    const bool p_misclassified = label_at_p != sample.label;

    std::vector<std::pair<double, double>> stack{{0.0, p}};
    while (!stack.empty()) {
        const auto [a, b] = stack.back();
        stack.pop_back();
        ++verdict.subintervals_explored;

        const double mid = a + 0.5 * (b - a);
        if (const std::size_t label = label_at(mid); label != sample.label)
            return counterexample(a, mid, label);

        const bool narrow = b - a < delta_min;
        if (p_misclassified && b == p) {
            if (narrow)
                return counterexample(mid, b, label_at_p);
        } else {
            segment.lo = a;
            segment.hi = b;
            const auto margins = margin_lower_bounds(model, segment, sample.label);
            if (std::all_of(margins.begin(), margins.end(), [](double m) { return m > 0.0; }))
                continue;
            if (narrow) {
                verdict.unknown_mass += b - a;
                continue;
            }
        }
        stack.emplace_back(mid, b);
        stack.emplace_back(a, mid);
    }

    verdict.outcome = verdict.unknown_mass > 0.0 ? VerdictOutcome::unknown : VerdictOutcome::robust;
    return verdict;
}

std::string_view to_string(CertifyStatus status)
{
    switch (status) {
    case CertifyStatus::certified:
        return "certified";
    case CertifyStatus::robust_full_range:
        return "robust_full_range";
    case CertifyStatus::inconclusive:
        return "inconclusive";
    }
    return "?";
}

CertifiedBound min_adversarial_epsilon(const Model &model, const ImageSample &sample, const HazeColor &haze_color,
                                       double tol, double delta_min, double max_p)
{
    if (!(tol > 0.0 && tol < 1.0))
        throw_range("min_adversarial_epsilon: tol must lie in (0, 1)");
    if (!(max_p > 0.0 && max_p <= 1.0))
        throw_range("min_adversarial_epsilon: max_p must lie in (0, 1]");

    CertifiedBound bound;
    bound.tol = tol;
    bound.delta_min = delta_min;

    auto run = [&](double p) {
        Verdict v = verify_haze(model, sample, haze_color, p, delta_min);
        ++bound.verifier_calls;
        bound.subintervals_explored += v.subintervals_explored;
        return v;
    };

    const Verdict full = run(max_p);
    if (full.outcome == VerdictOutcome::robust) {
        bound.status = CertifyStatus::robust_full_range;
        bound.robust_up_to = max_p;
        return bound;
    }
    if (full.outcome == VerdictOutcome::unknown) {
        bound.status = CertifyStatus::inconclusive;
        return bound;
    }

    double p_lo = 0.0;
    double p_hi = full.counterexample_eps;
    bound.adversarial_label = full.counterexample_label;
    bound.status = CertifyStatus::certified;
    while (p_hi - p_lo > tol) {
        const double mid = p_lo + 0.5 * (p_hi - p_lo);
        const Verdict v = run(mid);
        if (v.outcome == VerdictOutcome::robust) {
            p_lo = mid;
        } else if (v.outcome == VerdictOutcome::counterexample) {
            p_hi = std::min(p_hi, v.counterexample_eps);
            bound.adversarial_label = v.counterexample_label;
        } else {
            bound.status = CertifyStatus::inconclusive;
            break;
        }
    }
    bound.robust_up_to = p_lo;
    bound.adversarial_at = p_hi;
    return bound;
}

void write_certified_csv(const std::vector<CertifiedEntry> &entries, const std::filesystem::path &path)
{
    std::vector<const CertifiedEntry *> sorted;
    for (const auto &e : entries)
        sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](const CertifiedEntry *a, const CertifiedEntry *b) {
        return std::tie(a->model_id, a->sample_id) < std::tie(b->model_id, b->sample_id);
    });

    csv::Table table;
    table.header = {"model_id", "sample_id", "outcome",  "robust_up_to", "adversarial_at",
                    "tol",      "delta_min", "subintervals_explored"};
    for (const CertifiedEntry *e : sorted) {
        const CertifiedBound &b = e->bound;
        if (e->misclassified_at_zero) {
            table.rows.push_back({e->model_id, e->sample_id, "misclassified_at_zero", "", "",
                                  csv::format_double(b.tol), csv::format_double(b.delta_min), "0"});
            continue;
        }
        table.rows.push_back({e->model_id, e->sample_id, std::string(to_string(b.status)),
                              csv::format_double(b.robust_up_to),
                              b.adversarial_at ? csv::format_double(*b.adversarial_at) : "",
                              csv::format_double(b.tol), csv::format_double(b.delta_min),
                              std::to_string(b.subintervals_explored)});
    }
    csv::write(path, table);
}

std::vector<CertifiedEntry> read_certified_csv(const std::filesystem::path &path)
{
    const csv::Table table = csv::read(path);
    const std::size_t c_model = table.column("model_id"), c_sample = table.column("sample_id"),
                      c_outcome = table.column("outcome"), c_robust = table.column("robust_up_to"),
                      c_adv = table.column("adversarial_at"), c_tol = table.column("tol"),
                      c_delta = table.column("delta_min"), c_explored = table.column("subintervals_explored");

    std::vector<CertifiedEntry> entries;
    for (const auto &row : table.rows) {
        CertifiedEntry e;
        e.model_id = row[c_model];
        e.sample_id = row[c_sample];
        e.bound.tol = csv::parse_double(row[c_tol]);
        e.bound.delta_min = csv::parse_double(row[c_delta]);
        e.bound.subintervals_explored = std::stoul(row[c_explored]);
        const std::string &outcome = row[c_outcome];
        if (outcome == "misclassified_at_zero") {
            e.misclassified_at_zero = true;
        } else if (outcome == "certified") {
            e.bound.status = CertifyStatus::certified;
        } else if (outcome == "robust_full_range") {
            e.bound.status = CertifyStatus::robust_full_range;
        } else if (outcome == "inconclusive") {
            e.bound.status = CertifyStatus::inconclusive;
        } else {
            throw FormatError(path.string() + ": unknown outcome '" + outcome + "'");
        }
        if (!row[c_robust].empty())
            e.bound.robust_up_to = csv::parse_double(row[c_robust]);
        if (!row[c_adv].empty())
            e.bound.adversarial_at = csv::parse_double(row[c_adv]);
        entries.push_back(std::move(e));
    }
    return entries;
}

} // namespace ctxcert
