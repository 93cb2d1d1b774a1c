#include "cli.hpp"

#include "ctxcert/ctxcert.hpp"
#include "ctxcert/csv.hpp"
#include "ctxcert/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

namespace ctxcert::cli {

namespace fs = std::filesystem;
using nlohmann::json;

PerturbationSpec RunConfig::spec() const
{
    PerturbationSpec s;
    s.kind = perturbation;
    s.haze_color = haze_color;
    s.kernel_half_width = kd;
    s.sigma_max = sigma_max;
    return s;
}

void RunConfig::validate() const
{
    if (!(omega > 0.0 && omega < 1.0))
        throw RangeError("--omega must lie in (0, 1), got " + csv::format_double(omega));
    if (!(tol > 0.0 && tol < 1.0))
        throw RangeError("--tol must lie in (0, 1), got " + csv::format_double(tol));
    if (!(delta_min > 0.0 && delta_min < 1.0))
        throw RangeError("--delta-min must lie in (0, 1), got " + csv::format_double(delta_min));
    if (grid < 2)
        throw RangeError("--grid must be at least 2");
    if (kd < 1)
        throw RangeError("--kd must be at least 1");
    if (!(sigma_max > 0.0))
        throw RangeError("--sigma-max must be positive");
    for (float c : haze_color)
        if (!(c >= 0.0f && c <= 1.0f))
            throw RangeError("--haze-color components must lie in [0, 1]");
    if (!(max_p > 0.0 && max_p <= 1.0))
        throw RangeError("--max-p must lie in (0, 1]");
}

fs::path RunConfig::results_path() const
{
    return results.value_or(out / "results.csv");
}

fs::path RunConfig::certified_path() const
{
    return certified.value_or(out / "certified.csv");
}

std::string sha256_file(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 initialisation failed");
    char buffer[1 << 16];
    while (in) {
        in.read(buffer, sizeof(buffer));
        if (in.gcount() > 0)
            EVP_DigestUpdate(ctx.get(), buffer, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    static const char *hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

namespace {

struct Inputs {
    std::vector<Model> models;
    Dataset dataset;
};

Inputs load_inputs(const RunConfig &config)
{
    if (config.models.empty())
        throw RangeError("--models is required");
    if (config.data.empty())
        throw RangeError("--data is required");
    Inputs inputs;
    std::set<std::string> ids;
    for (const auto &path : config.models) {
        inputs.models.push_back(load_model(path));
        if (!ids.insert(inputs.models.back().id()).second)
            throw FormatError("duplicate model id '" + inputs.models.back().id() + "'");
    }
    inputs.dataset = load_dataset(config.data);
    for (const Model &model : inputs.models) {
        if (model.input_shape() != inputs.dataset.samples.front().image.shape())
            throw ShapeError("model '" + model.id() + "' input " + shape_to_string(model.input_shape()) +
                             " does not match dataset images " +
                             shape_to_string(inputs.dataset.samples.front().image.shape()));
        if (model.num_classes() < inputs.dataset.num_classes())
            throw ShapeError("model '" + model.id() + "' has fewer classes than the dataset");
    }
    return inputs;
}

void ensure_out_dir(const fs::path &dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError("cannot create output directory " + dir.string());
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream test(probe);
        if (!test)
            throw IoError("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

// Manifests plus every NPY payload they reference.
std::vector<fs::path> input_files(const RunConfig &config)
{
    std::vector<fs::path> files;
    auto add_manifest = [&](const fs::path &manifest_path) {
        files.push_back(manifest_path);
        std::ifstream in(manifest_path);
        const json manifest = json::parse(in, nullptr, false);
        if (manifest.is_discarded())
            return;
        const fs::path base = manifest_path.parent_path();
        for (const char *key : {"images", "labels"})
            if (manifest.contains(key) && manifest[key].is_string())
                files.push_back(base / manifest[key].get<std::string>());
        if (manifest.contains("layers"))
            for (const auto &layer : manifest["layers"])
                for (const char *key : {"weights", "bias"})
                    if (layer.contains(key) && layer[key].is_string())
                        files.push_back(base / layer[key].get<std::string>());
    };
    for (const auto &m : config.models)
        add_manifest(m);
    if (!config.data.empty())
        add_manifest(config.data);
    return files;
}

std::string iso8601_now()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

void write_run_manifest(const RunConfig &config, const std::string &command, const std::vector<fs::path> &outputs)
{
    json params;
    params["perturbation"] = std::string(to_string(config.perturbation));
    params["haze_color"] = config.haze_color;
    params["kd"] = config.kd;
    params["sigma_max"] = config.sigma_max;
    params["omega"] = config.omega;
    params["grid"] = config.grid;
    params["tol"] = config.tol;
    params["delta_min"] = config.delta_min;
    params["workers"] = config.workers;
    params["seed"] = config.seed;
    params["max_p"] = config.max_p;
    params["samples"] = config.samples;
    if (config.first_correct)
        params["first_correct"] = *config.first_correct;
    params["classes"] = config.classes;

    json manifest;
    manifest["command"] = command;
    manifest["version"] = kVersion;
    manifest["timestamp"] = iso8601_now();
    manifest["parameters"] = params;
    manifest["inputs"] = json::array();
    for (const auto &file : input_files(config))
        manifest["inputs"].push_back({{"path", file.generic_string()}, {"sha256", sha256_file(file)}});
    manifest["outputs"] = json::array();
    for (const auto &file : outputs)
        manifest["outputs"].push_back(file.lexically_relative(config.out).generic_string());

    const fs::path path = config.out / ("run_" + command + ".json");
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << manifest.dump(2) << '\n';
}

// Load-phase failures map to exit 1, evaluation failures to exit 2.
template <class Body>
int guarded(std::ostream &err, Body &&body)
{
    try {
        return body();
    } catch (const RangeError &e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const IoError &e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kEvalError;
    }
}

template <class Load>
auto load_or_fail(std::ostream &err, Load &&load) -> std::optional<decltype(load())>
{
    try {
        return load();
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return std::nullopt;
    }
}

} // namespace

int cmd_eval(const RunConfig &config, std::ostream &out, std::ostream &err)
{
    auto inputs = load_or_fail(err, [&] {
        config.validate();
        config.spec().validate();
        ensure_out_dir(config.out);
        return load_inputs(config);
    });
    if (!inputs)
        return kConfigError;

    return guarded(err, [&] {
        const ResultSet results =
            evaluate_dataset(inputs->models, inputs->dataset, config.spec(), config.omega, config.workers);
        const fs::path path = config.out / "results.csv";
        write_result_set_csv(results, path);
        write_run_manifest(config, "eval", {path});
        out << path.generic_string() << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_verify(const RunConfig &config, std::ostream &out, std::ostream &err)
{
    if (config.perturbation != PerturbationKind::haze) {
        err << "error: formal verification supports haze only (got --perturbation "
            << to_string(config.perturbation) << ")\n";
        return kConfigError;
    }
    auto inputs = load_or_fail(err, [&] {
        config.validate();
        ensure_out_dir(config.out);
        return load_inputs(config);
    });
    if (!inputs)
        return kConfigError;

    for (const auto &id : config.samples) {
        if (!inputs->dataset.find(id)) {
            err << "error: --samples names unknown sample '" << id << "'\n";
            return kConfigError;
        }
    }

    return guarded(err, [&] {
        struct Job {
            const Model *model;
            const ImageSample *sample;
        };
        std::vector<Job> jobs;
        for (const Model &model : inputs->models) {
            std::size_t taken = 0;
            for (const ImageSample &sample : inputs->dataset.samples) {
                if (!config.samples.empty() &&
                    std::find(config.samples.begin(), config.samples.end(), sample.sample_id) == config.samples.end())
                    continue;
                if (config.first_correct) {
                    if (taken >= *config.first_correct)
                        break;
                    if (classify(model, sample.image) != sample.label)
                        continue;
                    ++taken;
                }
                jobs.push_back({&model, &sample});
            }
        }

        std::vector<CertifiedEntry> entries(jobs.size());
        parallel_for(jobs.size(), config.workers, [&](std::size_t i) {
            const Job &job = jobs[i];
            CertifiedEntry &entry = entries[i];
            entry.model_id = job.model->id();
            entry.sample_id = job.sample->sample_id;
            entry.bound.tol = config.tol;
            entry.bound.delta_min = config.delta_min;
            if (classify(*job.model, job.sample->image) != job.sample->label) {
                entry.misclassified_at_zero = true;
                return;
            }
            entry.bound = min_adversarial_epsilon(*job.model, *job.sample, config.haze_color, config.tol,
                                                  config.delta_min, config.max_p);
        });

        const fs::path path = config.out / "certified.csv";
        write_certified_csv(entries, path);
        write_run_manifest(config, "verify", {path});
        out << path.generic_string() << '\n';

        int code = kOk;
        for (const auto &e : entries) {
            if (!e.misclassified_at_zero && e.bound.status == CertifyStatus::inconclusive) {
                err << "warning: " << e.model_id << "/" << e.sample_id << " inconclusive, gap "
                    << csv::format_double(e.bound.gap()) << " > tol " << csv::format_double(config.tol) << '\n';
                code = kInconclusive;
            }
        }
        return code;
    });
}

int cmd_report(const RunConfig &config, std::ostream &out, std::ostream &err)
{
    auto inputs = load_or_fail(err, [&] {
        config.validate();
        config.spec().validate();
        ensure_out_dir(config.out);
        return load_inputs(config);
    });
    if (!inputs)
        return kConfigError;

    std::optional<ResultSet> results;
    if (fs::exists(config.results_path())) {
        auto loaded = load_or_fail(err, [&] { return read_result_set_csv(config.results_path()); });
        if (!loaded)
            return kConfigError;
        results = std::move(*loaded);
    } else if (config.results) {
        err << "error: results file " << config.results->string() << " does not exist\n";
        return kConfigError;
    }
    std::optional<std::vector<CertifiedEntry>> certified;
    if (fs::exists(config.certified_path())) {
        certified = load_or_fail(err, [&] { return read_certified_csv(config.certified_path()); });
        if (!certified)
            return kConfigError;
    }

    return guarded(err, [&] {
        const PerturbationSpec spec = config.spec();
        const auto grid = uniform_grid(config.grid);
        Report report;
        report.class_names = inputs->dataset.class_names;
        std::vector<fs::path> written;

        for (const Model &model : inputs->models) {
            report.model_curves.push_back(accuracy_curve(model, inputs->dataset, spec, grid, config.workers));
            ClassCurves per_class =
                class_accuracy_curves(model, inputs->dataset, spec, grid, config.workers, config.classes);
            for (std::size_t c : per_class.skipped_classes)
                err << "warning: class " << c << " has no samples; no curve for model " << model.id() << '\n';
            report.class_curves[model.id()] = std::move(per_class.curves);

            if (results && !results->for_model(model.id()).empty()) {
                report.distributions.push_back(epsilon_distribution(*results, model.id()));
                const CounterexampleStrip strip =
                    counterexample_strip(model, inputs->dataset, *results, spec, config.out);
                for (const StripRow &row : strip.rows) {
                    written.push_back(config.out / row.original);
                    if (row.perturbed)
                        written.push_back(config.out / *row.perturbed);
                }
                written.push_back(strip.manifest);
            }
        }
        if (results && certified && !certified->empty())
            report.comparison = comparison_table(*certified, *results);

        const auto files = write_report(report, config.out);
        written.insert(written.begin(), files.begin(), files.end());
        write_run_manifest(config, "report", written);
        for (const auto &f : written)
            out << f.generic_string() << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_counterexample(const RunConfig &config, std::ostream &out, std::ostream &err)
{
    auto inputs = load_or_fail(err, [&] {
        config.validate();
        config.spec().validate();
        ensure_out_dir(config.out);
        return load_inputs(config);
    });
    if (!inputs)
        return kConfigError;
    if (!fs::exists(config.results_path())) {
        err << "error: results file " << config.results_path().string() << " not found; run eval first\n";
        return kConfigError;
    }
    auto results = load_or_fail(err, [&] { return read_result_set_csv(config.results_path()); });
    if (!results)
        return kConfigError;

    return guarded(err, [&] {
        const PerturbationSpec spec = config.spec();
        const fs::path dir = config.out / "counterexamples";
        fs::create_directories(dir);

        csv::Table manifest;
        manifest.header = {"model_id",   "sample_id",       "status",   "eps",      "true_label",
                           "predicted_label", "original", "perturbed", "note"};
        std::vector<fs::path> written;

        for (const Model &model : inputs->models) {
            for (const ImageSample &sample : inputs->dataset.samples) {
                if (!config.samples.empty() &&
                    std::find(config.samples.begin(), config.samples.end(), sample.sample_id) == config.samples.end())
                    continue;
                const ResultEntry *entry = results->find(model.id(), sample.sample_id);
                if (!entry)
                    continue;
                const std::string status(to_string(entry->interval.status));
                const auto cex = generate_counterexample(model, sample, entry->interval, spec);
                if (!cex) {
                    manifest.rows.push_back(
                        {model.id(), sample.sample_id, status, "", std::to_string(sample.label), "", "", "",
                         "no counterexample"});
                    continue;
                }
                const std::string prefix = file_stem(model.id()) + "_" + file_stem(sample.sample_id);
                const fs::path original = prefix + "_original.ppm";
                const fs::path perturbed = prefix + "_perturbed.ppm";
                write_ppm(sample.image, dir / original);
                write_ppm(cex->perturbed_image, dir / perturbed);
                written.push_back(dir / original);
                written.push_back(dir / perturbed);
                manifest.rows.push_back({model.id(), sample.sample_id, status, csv::format_double(cex->eps),
                                         std::to_string(cex->true_label), std::to_string(cex->predicted_label),
                                         original.generic_string(), perturbed.generic_string(), ""});
            }
        }
        const fs::path manifest_path = dir / "counterexamples.csv";
        csv::write(manifest_path, manifest);
        written.push_back(manifest_path);
        write_run_manifest(config, "counterexample", written);
        for (const auto &f : written)
            out << f.generic_string() << '\n';
        return static_cast<int>(kOk);
    });
}

namespace {

template <class T>
std::vector<T> split_list(const std::string &text, const char *flag)
{
    std::vector<T> values;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        if (item.empty())
            continue;
        if constexpr (std::is_same_v<T, std::string>) {
            values.push_back(item);
        } else {
            std::istringstream parse(item);
            T v{};
            if (!(parse >> v) || !parse.eof())
                throw RangeError(std::string(flag) + ": cannot parse '" + item + "'");
            values.push_back(v);
        }
    }
    return values;
}

} // namespace

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Contextual robustness measurement and haze certification for small ReLU image classifiers"};
    app.require_subcommand(1);

    RunConfig config;
    std::vector<std::string> model_paths;
    std::string data_path, perturbation = "haze", haze_color = "1,1,1", out_dir = "out";
    std::string samples, classes, results, certified;
    std::size_t first_correct = 0;

    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--models", model_paths, "Model manifest(s)")->delimiter(',');
        sub->add_option("--data", data_path, "Dataset manifest");
        sub->add_option("--perturbation", perturbation, "haze | contrast | blur");
        sub->add_option("--haze-color", haze_color, "Haze colour r,g,b in [0,1]");
        sub->add_option("--kd", config.kd, "Blur kernel half-width");
        sub->add_option("--sigma-max", config.sigma_max, "Blur sigma at eps = 1");
        sub->add_option("--omega", config.omega, "Bisection termination width");
        sub->add_option("--grid", config.grid, "Accuracy curve grid points");
        sub->add_option("--tol", config.tol, "Certified bound gap target");
        sub->add_option("--delta-min", config.delta_min, "Smallest eps subinterval the verifier splits");
        sub->add_option("--workers", config.workers, "Worker threads (0 = all cores)");
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--seed", config.seed, "Random seed recorded in the run manifest");
    };

    CLI::App *eval = app.add_subcommand("eval", "Test-based robustness intervals for every (model, sample)");
    CLI::App *verify = app.add_subcommand("verify", "Certified minimal adversarial haze level");
    CLI::App *report = app.add_subcommand("report", "Accuracy curves, distributions, strips and comparison tables");
    CLI::App *cex = app.add_subcommand("counterexample", "Original and perturbed images for recorded flips");
    for (CLI::App *sub : {eval, verify, report, cex})
        add_common(sub);
    for (CLI::App *sub : {verify, cex})
        sub->add_option("--samples", samples, "Comma-separated sample ids");
    verify->add_option("--first-correct", first_correct, "Verify the first N correctly classified samples per model");
    verify->add_option("--max-p", config.max_p, "Upper end of the certified haze range");
    for (CLI::App *sub : {report, cex})
        sub->add_option("--results", results, "Results CSV (default <out>/results.csv)");
    report->add_option("--certified", certified, "Certified CSV (default <out>/certified.csv)");
    report->add_option("--classes", classes, "Comma-separated class indices for per-class curves");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        for (const auto &m : model_paths)
            config.models.emplace_back(m);
        config.data = data_path;
        config.out = out_dir;
        config.perturbation = perturbation_kind_from_string(perturbation);
        const auto colour = split_list<float>(haze_color, "--haze-color");
        if (colour.size() != 3)
            throw RangeError("--haze-color expects three components r,g,b");
        config.haze_color = {colour[0], colour[1], colour[2]};
        config.samples = split_list<std::string>(samples, "--samples");
        config.classes = split_list<std::size_t>(classes, "--classes");
        if (verify->count("--first-correct") > 0)
            config.first_correct = first_correct;
        if (!results.empty())
            config.results = results;
        if (!certified.empty())
            config.certified = certified;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }

    if (eval->parsed())
        return cmd_eval(config, out, err);
    if (verify->parsed())
        return cmd_verify(config, out, err);
    if (report->parsed())
        return cmd_report(config, out, err);
    return cmd_counterexample(config, out, err);
}

} // namespace ctxcert::cli
