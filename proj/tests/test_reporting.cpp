#include "ctxcert/error.hpp"
#include "ctxcert/ppm.hpp"
#include "ctxcert/reporting.hpp"
#include "ctxcert/svg.hpp"

#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"
#include "toy_suite.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace ctxcert;
using namespace ctxcert::testing;

namespace {

std::string slurp(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count(const std::string &text, const std::string &needle)
{
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1))
        ++n;
    return n;
}

ResultEntry entry(const std::string &model, const std::string &sample, std::size_t label, IntervalStatus status,
                  double upper)
{
    ResultEntry e;
    e.model_id = model;
    e.sample_id = sample;
    e.true_label = label;
    e.interval.status = status;
    e.interval.eps_upper = upper;
    e.interval.eps_lower = status == IntervalStatus::flip_found ? upper - 0.001 : upper;
    return e;
}

ResultSet results_of(std::vector<ResultEntry> entries)
{
    ResultSet r;
    for (auto &e : entries)
        r.entries[{e.model_id, e.sample_id}] = e;
    return r;
}

const toy::ToySuite &suite()
{
    static const toy::ToySuite s = toy::make_toy_suite();
    return s;
}

} // namespace

TEST(Grid, UniformEndpoints)
{
    const auto g = uniform_grid();
    ASSERT_EQ(g.size(), 101u);
    EXPECT_EQ(g.front(), 0.0);
    EXPECT_EQ(g.back(), 1.0);
    EXPECT_DOUBLE_EQ(g[37], 0.37);
    const std::vector<double> bad{0.0, 0.5, 0.4};
    EXPECT_THROW(validate_grid(bad), RangeError);
}

TEST(AccuracyCurve, StartsAtCleanAccuracy)
{
    const auto grid = uniform_grid();
    for (const Model &m : suite().models) {
        for (const auto &spec : {PerturbationSpec::haze(), PerturbationSpec::contrast(), PerturbationSpec::blur()}) {
            const AccuracyCurve c = accuracy_curve(m, suite().dataset, spec, grid);
            std::size_t correct = 0;
            for (const auto &s : suite().dataset.samples)
                correct += classify(m, s.image) == s.label;
            EXPECT_EQ(c.correct[0], correct);
            EXPECT_EQ(c.accuracy[0], static_cast<double>(correct) / suite().dataset.size());
            for (std::size_t i = 0; i < grid.size(); ++i) {
                EXPECT_GE(c.accuracy[i], 0.0);
                EXPECT_LE(c.accuracy[i], 1.0);
                EXPECT_EQ(c.accuracy[i] * c.samples, std::round(c.accuracy[i] * c.samples));
            }
        }
    }
}

TEST(AccuracyCurve, ConstantModelIsFlat)
{
    Dataset d;
    d.class_names = {"a", "b"};
    std::mt19937_64 rng(2);
    for (int i = 0; i < 4; ++i)
        d.samples.push_back({random_image(rng, {3, 3, 3}), 1, "s" + std::to_string(i)});
    const AccuracyCurve c =
        accuracy_curve(constant_model({3, 3, 3}, 2, 1), d, PerturbationSpec::blur(), uniform_grid(11));
    for (double a : c.accuracy)
        EXPECT_EQ(a, 1.0);
    d.samples.clear();
    EXPECT_THROW(accuracy_curve(constant_model({3, 3, 3}, 2, 1), d, PerturbationSpec::haze(), uniform_grid(11)),
                 Error);
}

TEST(ClassCurves, PartitionIdentity)
{
    const auto grid = uniform_grid();
    for (const Model &m : suite().models) {
        const AccuracyCurve all = accuracy_curve(m, suite().dataset, PerturbationSpec::haze(), grid);
        const ClassCurves per = class_accuracy_curves(m, suite().dataset, PerturbationSpec::haze(), grid);
        ASSERT_EQ(per.curves.size(), 5u);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            std::size_t total = 0;
            for (const auto &c : per.curves)
                total += c.correct[i];
            EXPECT_EQ(total, all.correct[i]);
        }
    }
}

TEST(ClassCurves, SkipsEmptyAndFilters)
{
    Dataset d = suite().dataset;
    d.class_names.push_back("empty");
    const std::vector<std::size_t> wanted{0, 3, 5};
    const ClassCurves per =
        class_accuracy_curves(suite().models[0], d, PerturbationSpec::haze(), uniform_grid(11), 1, wanted);
    ASSERT_EQ(per.curves.size(), 2u);
    EXPECT_EQ(per.curves[0].class_filter, 0u);
    EXPECT_EQ(per.curves[1].class_filter, 3u);
    EXPECT_EQ(per.skipped_classes, (std::vector<std::size_t>{5}));
}

TEST(ClassCurves, SingleClassMatchesModelCurve)
{
    Dataset d;
    d.class_names = {"only"};
    for (const auto &s : suite().dataset.samples)
        if (s.label == 0)
            d.samples.push_back({s.image, 0, s.sample_id});
    const Model &m = suite().models[0];
    const auto grid = uniform_grid(21);
    const AccuracyCurve all = accuracy_curve(m, d, PerturbationSpec::haze(), grid);
    const ClassCurves per = class_accuracy_curves(m, d, PerturbationSpec::haze(), grid);
    ASSERT_EQ(per.curves.size(), 1u);
    EXPECT_EQ(per.curves[0].accuracy, all.accuracy);
}

TEST(Quantile, LinearInterpolation)
{
    const std::vector<double> v{0.2, 0.4, 0.6, 0.8};
    EXPECT_DOUBLE_EQ(quantile(v, 0.5), 0.5);
    EXPECT_DOUBLE_EQ(quantile(v, 0.25), 0.35);
    EXPECT_DOUBLE_EQ(quantile(v, 0.75), 0.65);
    EXPECT_DOUBLE_EQ(quantile(v, 0.0), 0.2);
    EXPECT_DOUBLE_EQ(quantile(v, 1.0), 0.8);
}

TEST(EpsDistribution, Quartiles)
{
    const ResultSet r = results_of({entry("m", "a", 0, IntervalStatus::flip_found, 0.2),
                                    entry("m", "b", 0, IntervalStatus::flip_found, 0.4),
                                    entry("m", "c", 0, IntervalStatus::flip_found, 0.6),
                                    entry("m", "d", 0, IntervalStatus::flip_found, 0.8),
                                    entry("m", "e", 1, IntervalStatus::robust_full_range, 1.0),
                                    entry("m", "f", 1, IntervalStatus::robust_full_range, 1.0),
                                    entry("m", "g", 2, IntervalStatus::flip_found, 0.3)});
    const EpsDistribution d = epsilon_distribution(r, "m");
    ASSERT_EQ(d.classes.size(), 3u);
    const auto &c0 = *d.classes[0].summary;
    EXPECT_DOUBLE_EQ(c0.median, 0.5);
    EXPECT_DOUBLE_EQ(c0.q1, 0.35);
    EXPECT_DOUBLE_EQ(c0.q3, 0.65);
    EXPECT_EQ(d.classes[0].n_flip, 4u);
    EXPECT_FALSE(d.classes[1].summary);
    EXPECT_EQ(d.classes[1].n_robust, 2u);
    const auto &c2 = *d.classes[2].summary;
    for (double v : {c2.min, c2.q1, c2.median, c2.q3, c2.max})
        EXPECT_EQ(v, 0.3);
    EXPECT_THROW(epsilon_distribution(r, "other"), Error);
}

TEST(EpsDistribution, Outliers)
{
    std::vector<ResultEntry> es;
    for (int i = 0; i < 8; ++i)
        es.push_back(entry("m", "s" + std::to_string(i), 0, IntervalStatus::flip_found, 0.40 + 0.01 * i));
    es.push_back(entry("m", "far", 0, IntervalStatus::flip_found, 0.95));
    const auto d = epsilon_distribution(results_of(es), "m");
    EXPECT_EQ(d.classes[0].summary->outliers, (std::vector<double>{0.95}));
}

TEST(Strip, PerturbedAtClassAverage)
{
    TempDir dir;
    const Model m = constant_model({8, 8, 3}, 5, 0);
    Dataset d;
    d.class_names = {"a", "b"};
    std::mt19937_64 rng(3);
    for (int i = 0; i < 4; ++i)
        d.samples.push_back({random_image(rng, {8, 8, 3}), static_cast<std::size_t>(i / 2), "s" + std::to_string(i)});
    const ResultSet r = results_of({entry("m", "s0", 0, IntervalStatus::flip_found, 0.5),
                                    entry("m", "s1", 0, IntervalStatus::flip_found, 0.7),
                                    entry("m", "s2", 1, IntervalStatus::robust_full_range, 1.0),
                                    entry("m", "s3", 1, IntervalStatus::robust_full_range, 1.0)});
    const Model named("m", m.input_shape(), m.layers());
    const CounterexampleStrip strip = counterexample_strip(named, d, r, PerturbationSpec::haze(), dir.path());
    ASSERT_EQ(strip.rows.size(), 2u);
    ASSERT_TRUE(strip.rows[0].average_eps);
    EXPECT_DOUBLE_EQ(*strip.rows[0].average_eps, 0.6);
    const Tensor expected = apply_haze(d.samples[0].image, 0.6, {1, 1, 1});
    const Tensor got = read_ppm(dir.path() / *strip.rows[0].perturbed);
    for (std::size_t i = 0; i < got.size(); ++i)
        EXPECT_EQ(got[i], quantize(expected[i]) / 255.0f);
    EXPECT_FALSE(strip.rows[1].perturbed);
    EXPECT_TRUE(std::filesystem::exists(dir.path() / strip.rows[1].original));
    const std::string manifest = slurp(strip.manifest);
    EXPECT_NE(manifest.find("no counterexample"), std::string::npos);
    EXPECT_EQ(manifest.find(dir.path().string()), std::string::npos);
}

TEST(Ppm, HeaderAndRoundTrip)
{
    TempDir dir;
    std::mt19937_64 rng(4);
    const Tensor img = random_image(rng, {3, 5, 3});
    write_ppm(img, dir / "a.ppm");
    const std::string bytes = slurp(dir / "a.ppm");
    EXPECT_EQ(bytes.substr(0, 11), "P6\n5 3\n255\n");
    EXPECT_EQ(bytes.size(), 11u + 45u);
    const Tensor back = read_ppm(dir / "a.ppm");
    for (std::size_t i = 0; i < img.size(); ++i)
        EXPECT_NEAR(back[i], img[i], 0.5 / 255.0 + 1e-7);
    write_ppm(Tensor({1, 1, 1}, 0.5f), dir / "g.ppm");
    EXPECT_EQ(slurp(dir / "g.ppm").substr(11), std::string(3, static_cast<char>(128)));
}

TEST(Svg, TwoSeriesStructure)
{
    svg::LineChart chart{"t <1>", "eps", "accuracy", {}};
    chart.series.push_back({"a", {0.0, 0.5, 1.0}, {1.0, 0.5, 0.0}});
    chart.series.push_back({"b&c", {0.0, 1.0}, {1.0, 1.0}});
    const std::string text = svg::render_line_chart(chart);
    EXPECT_NE(text.find("viewBox=\"0 0 640 480\""), std::string::npos);
    EXPECT_EQ(count(text, "<polyline class=\"series\""), 2u);
    EXPECT_EQ(count(text, "<g class=\"legend-row\""), 2u);
    EXPECT_NE(text.find("b&amp;c"), std::string::npos);
    EXPECT_NE(text.find("t &lt;1&gt;"), std::string::npos);
    EXPECT_EQ(text, svg::render_line_chart(chart));
}

TEST(Comparison, AgreementRules)
{
    CertifiedEntry same{"m", "a", false, {}};
    same.bound.status = CertifyStatus::certified;
    same.bound.adversarial_at = 0.623;
    same.bound.robust_up_to = 0.622;
    const BumpCase bump = bump_model();
    CertifiedEntry onset{"m", "b", false, min_adversarial_epsilon(bump.model, bump.sample, {1, 1, 1})};
    CertifiedEntry robust{"m", "c", false, {}};
    robust.bound.status = CertifyStatus::robust_full_range;
    CertifiedEntry unknown{"m", "d", false, {}};
    unknown.bound.status = CertifyStatus::inconclusive;
    const std::vector<CertifiedEntry> certified{same, onset, robust, unknown};
    const auto tested_bump = robustness_interval(bump.model, bump.sample, PerturbationSpec::haze());
    const ResultSet tested = results_of({entry("m", "a", 0, IntervalStatus::flip_found, 0.623),
                                         entry("m", "b", 0, IntervalStatus::flip_found, tested_bump.eps_upper),
                                         entry("m", "c", 0, IntervalStatus::robust_full_range, 1.0),
                                         entry("m", "d", 0, IntervalStatus::robust_full_range, 1.0)});
    const ComparisonTable t = comparison_table(certified, tested);
    ASSERT_EQ(t.rows.size(), 4u);
    EXPECT_TRUE(t.rows[0].agree);
    EXPECT_FALSE(t.rows[1].agree);
    EXPECT_TRUE(t.rows[2].agree);
    EXPECT_FALSE(t.rows[3].agree);
    const ResultSet other = results_of({entry("x", "a", 0, IntervalStatus::flip_found, 0.5)});
    EXPECT_THROW(comparison_table(certified, other), FormatError);
}

TEST(WriteReport, DeterministicAcrossWorkers)
{
    const auto grid = uniform_grid();
    auto build = [&](std::size_t workers) {
        Report report;
        report.class_names = suite().dataset.class_names;
        const ResultSet r = evaluate_dataset(suite().models, suite().dataset, PerturbationSpec::haze(), 0.002, workers);
        for (const Model &m : suite().models) {
            report.model_curves.push_back(accuracy_curve(m, suite().dataset, PerturbationSpec::haze(), grid, workers));
            report.class_curves[m.id()] =
                class_accuracy_curves(m, suite().dataset, PerturbationSpec::haze(), grid, workers).curves;
            report.distributions.push_back(epsilon_distribution(r, m.id()));
        }
        return report;
    };
    TempDir a, b;
    const auto files_a = write_report(build(1), a.path());
    const auto files_b = write_report(build(3), b.path());
    ASSERT_EQ(files_a.size(), files_b.size());
    for (std::size_t i = 0; i < files_a.size(); ++i) {
        EXPECT_EQ(files_a[i].filename(), files_b[i].filename());
        EXPECT_EQ(slurp(files_a[i]), slurp(files_b[i])) << files_a[i];
        EXPECT_EQ(slurp(files_a[i]).find(a.path().string()), std::string::npos);
    }
    EXPECT_EQ(slurp(a / "curve_toy_dense.csv").substr(0, 13), "eps,accuracy\n");
    const std::string header = "class,min,q1,median,q3,max,n_flip,n_robust,n_misclassified_at_zero\n";
    EXPECT_EQ(slurp(a / "distribution_toy_cnn.csv").substr(0, header.size()), header);
}
