#include "ctxcert/reporting.hpp"

#include "ctxcert/csv.hpp"
#include "ctxcert/error.hpp"
#include "ctxcert/parallel.hpp"
#include "ctxcert/ppm.hpp"
#include "ctxcert/svg.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

namespace ctxcert {

namespace fs = std::filesystem;

std::vector<double> uniform_grid(std::size_t points)
{
    if (points == 0)
        throw_range("grid must have at least one point");
    std::vector<double> grid(points, 0.0);
    for (std::size_t i = 1; i < points; ++i)
        grid[i] = static_cast<double>(i) / static_cast<double>(points - 1);
    return grid;
}

void validate_grid(std::span<const double> grid)
{
    if (grid.empty())
        throw_range("eps grid is empty");
    if (grid.front() != 0.0)
        throw_range("eps grid must start at 0");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0 && grid[i] <= 1.0))
            throw_range("eps grid value outside [0, 1]");
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw_range("eps grid must be strictly ascending");
    }
}

namespace {

// correct[s][g]: sample s classified correctly at grid point g.
std::vector<std::vector<char>> correctness(const Model &model, const Dataset &dataset, const PerturbationSpec &spec,
                                           std::span<const double> grid, std::size_t workers)
{
    validate_grid(grid);
    spec.validate();
    if (dataset.samples.empty())
        throw_range("accuracy curve requested for an empty dataset");
    std::vector<std::vector<char>> table(dataset.size(), std::vector<char>(grid.size(), 0));
    parallel_for(dataset.size(), workers, [&](std::size_t s) {
        const ImageSample &sample = dataset.samples[s];
        for (std::size_t g = 0; g < grid.size(); ++g)
            table[s][g] = classify(model, perturb(spec, sample.image, grid[g])) == sample.label;
    });
    return table;
}

AccuracyCurve curve_from(const std::string &model_id, std::optional<std::size_t> class_filter,
                         std::span<const double> grid, const std::vector<std::vector<char>> &table,
                         const std::vector<std::size_t> &members)
{
    AccuracyCurve curve;
    curve.model_id = model_id;
    curve.class_filter = class_filter;
    curve.eps_grid.assign(grid.begin(), grid.end());
    curve.samples = members.size();
    curve.correct.assign(grid.size(), 0);
    for (std::size_t s : members)
        for (std::size_t g = 0; g < grid.size(); ++g)
            curve.correct[g] += table[s][g] ? 1 : 0;
    curve.accuracy.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
        curve.accuracy[g] = static_cast<double>(curve.correct[g]) / static_cast<double>(curve.samples);
    return curve;
}

std::string format_optional(const std::optional<double> &value)
{
    return value ? csv::format_double(*value) : "";
}

} // namespace

AccuracyCurve accuracy_curve(const Model &model, const Dataset &dataset, const PerturbationSpec &spec,
                             std::span<const double> eps_grid, std::size_t workers)
{
    const auto table = correctness(model, dataset, spec, eps_grid, workers);
    std::vector<std::size_t> all(dataset.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    return curve_from(model.id(), std::nullopt, eps_grid, table, all);
}

ClassCurves class_accuracy_curves(const Model &model, const Dataset &dataset, const PerturbationSpec &spec,
                                  std::span<const double> eps_grid, std::size_t workers,
                                  std::span<const std::size_t> classes)
{
    const auto table = correctness(model, dataset, spec, eps_grid, workers);

    std::vector<std::size_t> wanted(classes.begin(), classes.end());
    if (wanted.empty())
        for (std::size_t c = 0; c < std::max(dataset.num_classes(), model.num_classes()); ++c)
            wanted.push_back(c);
    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());

    ClassCurves out;
    for (std::size_t c : wanted) {
        std::vector<std::size_t> members;
        for (std::size_t s = 0; s < dataset.size(); ++s)
            if (dataset.samples[s].label == c)
                members.push_back(s);
        if (members.empty()) {
            out.skipped_classes.push_back(c);
            continue;
        }
        out.curves.push_back(curve_from(model.id(), c, eps_grid, table, members));
    }
    return out;
}

double quantile(std::span<const double> sorted, double q)
{
    if (sorted.empty())
        throw_range("quantile of an empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lower = static_cast<std::size_t>(std::floor(pos));
    const std::size_t upper = std::min(lower + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lower);
    return sorted[lower] + frac * (sorted[upper] - sorted[lower]);
}

EpsDistribution epsilon_distribution(const ResultSet &results, const std::string &model_id)
{
    const auto entries = results.for_model(model_id);
    if (entries.empty())
        throw FormatError("no results for model '" + model_id + "'");

    std::map<std::size_t, ClassEpsStats> by_class;
    std::map<std::size_t, std::vector<double>> values;
    for (const ResultEntry &e : entries) {
        ClassEpsStats &stats = by_class[e.true_label];
        stats.class_index = e.true_label;
        switch (e.interval.status) {
        case IntervalStatus::flip_found:
            ++stats.n_flip;
            values[e.true_label].push_back(e.interval.eps_upper);
            break;
        case IntervalStatus::misclassified_at_zero:
            ++stats.n_misclassified_at_zero;
            values[e.true_label].push_back(0.0);
            break;
        case IntervalStatus::robust_full_range:
            ++stats.n_robust;
            break;
        }
    }

    EpsDistribution dist;
    dist.model_id = model_id;
    for (auto &[c, stats] : by_class) {
        auto &v = values[c];
        if (!v.empty()) {
            std::sort(v.begin(), v.end());
            BoxSummary box;
            box.min = v.front();
            box.q1 = quantile(v, 0.25);
            box.median = quantile(v, 0.5);
            box.q3 = quantile(v, 0.75);
            box.max = v.back();
            const double iqr = box.q3 - box.q1;
            for (double x : v)
                if (x < box.q1 - 1.5 * iqr || x > box.q3 + 1.5 * iqr)
                    box.outliers.push_back(x);
            stats.summary = std::move(box);
        }
        dist.classes.push_back(stats);
    }
    return dist;
}

std::string file_stem(const std::string &id)
{
    std::string out = id;
    for (char &c : out)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
            c = '_';
    return out.empty() ? "_" : out;
}

CounterexampleStrip counterexample_strip(const Model &model, const Dataset &dataset, const ResultSet &results,
                                         const PerturbationSpec &spec, const fs::path &out_dir)
{
    fs::create_directories(out_dir);
    const std::string stem = file_stem(model.id());

    std::set<std::size_t> classes;
    for (const auto &sample : dataset.samples)
        if (results.find(model.id(), sample.sample_id))
            classes.insert(sample.label);
    if (classes.empty())
        throw FormatError("no results for model '" + model.id() + "' match the dataset");

    CounterexampleStrip strip;
    csv::Table manifest;
    manifest.header = {"class", "sample_id", "average_eps", "original", "perturbed", "note"};

    for (std::size_t c : classes) {
        const ImageSample *representative = nullptr;
        const ImageSample *fallback = nullptr;
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto &sample : dataset.samples) {
            if (sample.label != c)
                continue;
            const ResultEntry *entry = results.find(model.id(), sample.sample_id);
            if (!entry)
                continue;
            if (!fallback)
                fallback = &sample;
            switch (entry->interval.status) {
            case IntervalStatus::flip_found:
                sum += entry->interval.eps_upper;
                ++count;
                if (!representative)
                    representative = &sample;
                break;
            case IntervalStatus::misclassified_at_zero:
                ++count;
                break;
            case IntervalStatus::robust_full_range:
                break;
            }
        }
        if (!representative)
            representative = fallback;

        StripRow row;
        row.class_index = c;
        row.sample_id = representative->sample_id;
        const std::string prefix = stem + "_class" + std::to_string(c);
        row.original = prefix + "_original.ppm";
        write_ppm(representative->image, out_dir / row.original);

        std::string note;
        if (count > 0) {
            row.average_eps = sum / static_cast<double>(count);
            row.perturbed = prefix + "_perturbed.ppm";
            write_ppm(perturb(spec, representative->image, *row.average_eps), out_dir / *row.perturbed);
        } else {
            note = "no counterexample";
        }
        manifest.rows.push_back({std::to_string(c), row.sample_id, format_optional(row.average_eps),
                                 row.original.generic_string(), row.perturbed ? row.perturbed->generic_string() : "",
                                 note});
        strip.rows.push_back(std::move(row));
    }

    strip.manifest = out_dir / ("strip_" + stem + ".csv");
    csv::write(strip.manifest, manifest);
    return strip;
}

ComparisonTable comparison_table(std::span<const CertifiedEntry> certified, const ResultSet &tested)
{
    ComparisonTable table;
    if (!certified.empty())
        table.tol = certified.front().bound.tol;

    for (const CertifiedEntry &c : certified) {
        const ResultEntry *t = tested.find(c.model_id, c.sample_id);
        if (!t)
            continue;
        ComparisonRow row;
        row.model_id = c.model_id;
        row.sample_id = c.sample_id;
        if (c.misclassified_at_zero)
            row.certified_adversarial_at = 0.0;
        else if (c.bound.status != CertifyStatus::robust_full_range)
            row.certified_adversarial_at = c.bound.adversarial_at;

        switch (t->interval.status) {
        case IntervalStatus::flip_found:
            row.tested_eps_upper = t->interval.eps_upper;
            break;
        case IntervalStatus::misclassified_at_zero:
            row.tested_eps_upper = 0.0;
            break;
        case IntervalStatus::robust_full_range:
            break;
        }

        if (row.certified_adversarial_at && row.tested_eps_upper)
            row.agree = std::abs(*row.certified_adversarial_at - *row.tested_eps_upper) <= table.tol;
        else
            row.agree = !row.certified_adversarial_at && !row.tested_eps_upper &&
                        c.bound.status != CertifyStatus::inconclusive;
        table.rows.push_back(std::move(row));
    }
    if (table.rows.empty())
        throw FormatError("certified and tested results share no (model, sample) keys");
    std::sort(table.rows.begin(), table.rows.end(), [](const ComparisonRow &a, const ComparisonRow &b) {
        return std::tie(a.model_id, a.sample_id) < std::tie(b.model_id, b.sample_id);
    });
    return table;
}

namespace {

void write_text(const fs::path &path, const std::string &text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << text;
    if (!out)
        throw IoError("write failed for " + path.string());
}

svg::Series to_series(const AccuracyCurve &curve, std::string name)
{
    return svg::Series{std::move(name), curve.eps_grid, curve.accuracy};
}

std::string class_label(const Report &report, std::size_t c)
{
    if (c < report.class_names.size())
        return std::to_string(c) + " " + report.class_names[c];
    return "class " + std::to_string(c);
}

} // namespace

std::vector<fs::path> write_report(const Report &report, const fs::path &out_dir)
{
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw IoError("cannot create output directory " + out_dir.string());
    std::vector<fs::path> written;

    if (!report.model_curves.empty()) {
        svg::LineChart chart{"Model accuracy vs perturbation level", "perturbation level eps", "accuracy", {}};
        for (const AccuracyCurve &curve : report.model_curves) {
            csv::Table table{{"eps", "accuracy"}, {}};
            for (std::size_t g = 0; g < curve.eps_grid.size(); ++g)
                table.rows.push_back({csv::format_double(curve.eps_grid[g]), csv::format_double(curve.accuracy[g])});
            const fs::path path = out_dir / ("curve_" + file_stem(curve.model_id) + ".csv");
            csv::write(path, table);
            written.push_back(path);
            chart.series.push_back(to_series(curve, curve.model_id));
        }
        const fs::path path = out_dir / "model_curves.svg";
        write_text(path, svg::render_line_chart(chart));
        written.push_back(path);
    }

    for (const auto &[model_id, curves] : report.class_curves) {
        csv::Table table{{"class", "eps", "accuracy"}, {}};
        svg::LineChart chart{"Per-class accuracy, model " + model_id, "perturbation level eps", "accuracy", {}};
        for (const AccuracyCurve &curve : curves) {
            const std::size_t c = curve.class_filter.value_or(0);
            for (std::size_t g = 0; g < curve.eps_grid.size(); ++g)
                table.rows.push_back({std::to_string(c), csv::format_double(curve.eps_grid[g]),
                                      csv::format_double(curve.accuracy[g])});
            chart.series.push_back(to_series(curve, class_label(report, c)));
        }
        const std::string stem = file_stem(model_id);
        const fs::path csv_path = out_dir / ("class_curves_" + stem + ".csv");
        csv::write(csv_path, table);
        written.push_back(csv_path);
        const fs::path svg_path = out_dir / ("class_curves_" + stem + ".svg");
        write_text(svg_path, svg::render_line_chart(chart));
        written.push_back(svg_path);
    }

    for (const EpsDistribution &dist : report.distributions) {
        csv::Table table{{"class", "min", "q1", "median", "q3", "max", "n_flip", "n_robust", "n_misclassified_at_zero"},
                         {}};
        for (const ClassEpsStats &s : dist.classes) {
            std::vector<std::string> row{std::to_string(s.class_index)};
            if (s.summary) {
                for (double v : {s.summary->min, s.summary->q1, s.summary->median, s.summary->q3, s.summary->max})
                    row.push_back(csv::format_double(v));
            } else {
                row.insert(row.end(), 5, "");
            }
            row.push_back(std::to_string(s.n_flip));
            row.push_back(std::to_string(s.n_robust));
            row.push_back(std::to_string(s.n_misclassified_at_zero));
            table.rows.push_back(std::move(row));
        }
        const fs::path path = out_dir / ("distribution_" + file_stem(dist.model_id) + ".csv");
        csv::write(path, table);
        written.push_back(path);
    }

    if (report.comparison) {
        std::map<std::string, csv::Table> per_model;
        for (const ComparisonRow &row : report.comparison->rows) {
            csv::Table &table = per_model[row.model_id];
            table.header = {"sample_id", "certified_adversarial_at", "tested_eps_upper", "agree"};
            table.rows.push_back({row.sample_id, format_optional(row.certified_adversarial_at),
                                  format_optional(row.tested_eps_upper), row.agree ? "true" : "false"});
        }
        for (const auto &[model_id, table] : per_model) {
            const fs::path path = out_dir / ("comparison_" + file_stem(model_id) + ".csv");
            csv::write(path, table);
            written.push_back(path);
        }
    }
    return written;
}

} // namespace ctxcert
