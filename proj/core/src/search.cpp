#include "ctxcert/search.hpp"

#include "ctxcert/csv.hpp"
#include "ctxcert/error.hpp"
#include "ctxcert/parallel.hpp"

namespace ctxcert {

std::string_view to_string(IntervalStatus status)
{
    switch (status) {
    case IntervalStatus::misclassified_at_zero:
        return "misclassified_at_zero";
    case IntervalStatus::flip_found:
        return "flip_found";
    case IntervalStatus::robust_full_range:
        return "robust_full_range";
    }
    return "?";
}

IntervalStatus interval_status_from_string(std::string_view name)
{
    if (name == "misclassified_at_zero")
        return IntervalStatus::misclassified_at_zero;
    if (name == "flip_found")
        return IntervalStatus::flip_found;
    if (name == "robust_full_range")
        return IntervalStatus::robust_full_range;
    throw FormatError("unknown interval status '" + std::string(name) + "'");
}

RobustnessInterval robustness_interval(const Model &model, const ImageSample &sample, const PerturbationSpec &spec,
                                       double omega)
{
    if (!(omega > 0.0 && omega < 1.0))
        throw_range("omega " + std::to_string(omega) + " outside (0, 1)");
    spec.validate();

    RobustnessInterval result;
    const std::size_t clean = classify(model, perturb(spec, sample.image, 0.0));
    if (clean != sample.label) {
        result.status = IntervalStatus::misclassified_at_zero;
        result.label_at_lower = result.label_at_upper = clean;
        return result;
    }

    const std::size_t at_one = classify(model, perturb(spec, sample.image, 1.0));

    double lower = 0.0;
    double upper = 1.0;
    std::size_t label_upper = at_one;
    bool flipped = false;
    while (upper - lower > omega) {
        const double mid = 0.5 * (lower + upper);
        const std::size_t label = classify(model, perturb(spec, sample.image, mid));
        ++result.midpoint_probes;
        if (label == sample.label) {
            lower = mid;
        } else {
            upper = mid;
            label_upper = label;
            flipped = true;
        }
    }

    if (!flipped && at_one == sample.label) {
        result.status = IntervalStatus::robust_full_range;
        result.eps_lower = result.eps_upper = 1.0;
        result.label_at_lower = result.label_at_upper = sample.label;
        return result;
    }

    result.status = IntervalStatus::flip_found;
    result.eps_lower = lower;
    result.eps_upper = upper;
    result.label_at_lower = sample.label;
    result.label_at_upper = label_upper;
    return result;
}

std::vector<ResultEntry> ResultSet::for_model(const std::string &model_id) const
{
    std::vector<ResultEntry> out;
    for (const auto &[key, entry] : entries)
        if (key.first == model_id)
            out.push_back(entry);
    return out;
}

const ResultEntry *ResultSet::find(const std::string &model_id, const std::string &sample_id) const
{
    const auto it = entries.find(ResultKey{model_id, sample_id});
    return it == entries.end() ? nullptr : &it->second;
}

ResultSet evaluate_dataset(std::span<const Model> models, const Dataset &dataset, const PerturbationSpec &spec,
                           double omega, std::size_t workers)
{
    for (const Model &model : models) {
        for (const auto &sample : dataset.samples) {
            if (sample.image.shape() != model.input_shape())
                throw ShapeError("model '" + model.id() + "' expects input " + shape_to_string(model.input_shape()) +
                                 " but sample '" + sample.sample_id + "' is " + shape_to_string(sample.image.shape()));
            if (sample.label >= model.num_classes())
                throw RangeError("sample '" + sample.sample_id + "' label exceeds model '" + model.id() +
                                 "' class count");
        }
    }

    const std::size_t n = dataset.size();
    std::vector<RobustnessInterval> slots(models.size() * n);
    parallel_for(slots.size(), workers, [&](std::size_t i) {
        slots[i] = robustness_interval(models[i / n], dataset.samples[i % n], spec, omega);
    });

    ResultSet results;
    results.perturbation = spec;
    results.omega = omega;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const Model &model = models[i / n];
        const ImageSample &sample = dataset.samples[i % n];
        results.entries[ResultKey{model.id(), sample.sample_id}] =
            ResultEntry{model.id(), sample.sample_id, sample.label, slots[i]};
    }
    return results;
}

std::optional<Counterexample> generate_counterexample(const Model &model, const ImageSample &sample,
                                                      const RobustnessInterval &interval,
                                                      const PerturbationSpec &spec)
{
    if (interval.status == IntervalStatus::robust_full_range)
        return std::nullopt;

    Counterexample cex;
    cex.sample_id = sample.sample_id;
    cex.true_label = sample.label;
    cex.eps = interval.status == IntervalStatus::misclassified_at_zero ? 0.0 : interval.eps_upper;
    cex.perturbed_image = interval.status == IntervalStatus::misclassified_at_zero
                              ? sample.image
                              : perturb(spec, sample.image, cex.eps);
    cex.predicted_label = classify(model, cex.perturbed_image);
    if (cex.predicted_label == cex.true_label)
        throw InconsistencyError("sample '" + sample.sample_id + "' is classified correctly at eps " +
                                 csv::format_double(cex.eps) + " although the search recorded a misclassification");
    return cex;
}

void write_result_set_csv(const ResultSet &results, const std::filesystem::path &path)
{
    csv::Table table;
    table.header = {"model_id", "sample_id", "true_label", "status", "eps_lower", "eps_upper", "label_at_upper"};
    for (const auto &[key, entry] : results.entries) {
        const auto &r = entry.interval;
        table.rows.push_back({entry.model_id, entry.sample_id, std::to_string(entry.true_label),
                              std::string(to_string(r.status)), csv::format_double(r.eps_lower),
                              csv::format_double(r.eps_upper), std::to_string(r.label_at_upper)});
    }
    csv::write(path, table);
}

ResultSet read_result_set_csv(const std::filesystem::path &path)
{
    const csv::Table table = csv::read(path);
    const std::size_t c_model = table.column("model_id"), c_sample = table.column("sample_id"),
                      c_label = table.column("true_label"), c_status = table.column("status"),
                      c_lower = table.column("eps_lower"), c_upper = table.column("eps_upper"),
                      c_at_upper = table.column("label_at_upper");

    ResultSet results;
    for (const auto &row : table.rows) {
        ResultEntry entry;
        entry.model_id = row[c_model];
        entry.sample_id = row[c_sample];
        entry.true_label = std::stoul(row[c_label]);
        entry.interval.status = interval_status_from_string(row[c_status]);
        entry.interval.eps_lower = csv::parse_double(row[c_lower]);
        entry.interval.eps_upper = csv::parse_double(row[c_upper]);
        entry.interval.label_at_upper = std::stoul(row[c_at_upper]);
        entry.interval.label_at_lower = entry.interval.status == IntervalStatus::misclassified_at_zero
                                            ? entry.interval.label_at_upper
                                            : entry.true_label;
        results.entries[ResultKey{entry.model_id, entry.sample_id}] = entry;
    }
    return results;
}

} // namespace ctxcert
