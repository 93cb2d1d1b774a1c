#include "ctxcert/error.hpp"
#include "ctxcert/search.hpp"

#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ctxcert;
using namespace ctxcert::testing;

namespace {

bool is_dyadic(double x)
{
    // k / 2^m with m <= 60
    const double scaled = std::ldexp(x, 60);
    return scaled == std::floor(scaled);
}

Model flipped_labels_model(const Model &base)
{
    // Same network with the two output rows swapped.
    std::vector<Layer> layers = base.layers();
    Layer &last = layers.back();
    const std::size_t cols = last.weights.dim(1);
    for (std::size_t c = 0; c < cols; ++c)
        std::swap(last.weights[c], last.weights[cols + c]);
    std::swap(last.bias[0], last.bias[1]);
    return Model(base.id() + "_swapped", base.input_shape(), layers);
}

} // namespace

TEST(RobustnessInterval, MisclassifiedAtZero)
{
    const Model m = constant_model({1, 1, 1}, 2, 1);
    const auto r = robustness_interval(m, {Tensor({1, 1, 1}, 0.3f), 0, "x"}, PerturbationSpec::haze());
    EXPECT_EQ(r.status, IntervalStatus::misclassified_at_zero);
    EXPECT_EQ(r.eps_lower, 0.0);
    EXPECT_EQ(r.eps_upper, 0.0);
    EXPECT_EQ(r.midpoint_probes, 0u);
}

TEST(RobustnessInterval, FlipAt037)
{
    const FlipCase c = flip_model(0.2, 0.37);
    const auto r = robustness_interval(c.model, c.sample, PerturbationSpec::haze());
    ASSERT_EQ(r.status, IntervalStatus::flip_found);
    EXPECT_LE(r.eps_lower, c.flip_eps);
    EXPECT_GE(r.eps_upper, c.flip_eps);
    EXPECT_LE(r.eps_upper - r.eps_lower, 0.002);
    EXPECT_EQ(r.midpoint_probes, 9u);
    EXPECT_EQ(r.label_at_lower, 0u);
    EXPECT_EQ(r.label_at_upper, 1u);
}

TEST(RobustnessInterval, ConstantModelIsRobust)
{
    const Model m = constant_model({2, 2, 3}, 3, 2);
    const auto r = robustness_interval(m, {Tensor({2, 2, 3}, 0.4f), 2, "x"}, PerturbationSpec::blur());
    EXPECT_EQ(r.status, IntervalStatus::robust_full_range);
    EXPECT_EQ(r.eps_lower, 1.0);
    EXPECT_EQ(r.eps_upper, 1.0);
}

TEST(RobustnessInterval, OmegaOutOfRange)
{
    const FlipCase c = flip_model(0.2, 0.37);
    EXPECT_THROW(robustness_interval(c.model, c.sample, PerturbationSpec::haze(), 0.0), RangeError);
    EXPECT_THROW(robustness_interval(c.model, c.sample, PerturbationSpec::haze(), 1.0), RangeError);
}

TEST(RobustnessInterval, BisectionMissesTheBump)
{
    const BumpCase b = bump_model();
    const auto r = robustness_interval(b.model, b.sample, PerturbationSpec::haze());
    ASSERT_EQ(r.status, IntervalStatus::flip_found);
    EXPECT_EQ(r.eps_lower, 0.36328125);
    EXPECT_EQ(r.eps_upper, 0.365234375);
}

TEST(SearchProperty, ProbeCountAndEvidence)
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double omega : {0.002, 0.01, 0.1, 0.3}) {
        const auto expected = static_cast<std::size_t>(std::ceil(std::log2(1.0 / omega)));
        for (int trial = 0; trial < 40; ++trial) {
            const FlipCase c = flip_model(0.8 * u(rng), 0.01 + 0.98 * u(rng));
            const auto r = robustness_interval(c.model, c.sample, PerturbationSpec::haze(), omega);
            ASSERT_EQ(r.status, IntervalStatus::flip_found);
            EXPECT_EQ(r.midpoint_probes, expected);
            EXPECT_LE(r.eps_upper - r.eps_lower, omega);
            EXPECT_TRUE(is_dyadic(r.eps_lower));
            EXPECT_TRUE(is_dyadic(r.eps_upper));
            EXPECT_EQ(classify(c.model, apply_haze(c.sample.image, r.eps_lower, {1, 1, 1})), c.sample.label);
            EXPECT_NE(classify(c.model, apply_haze(c.sample.image, r.eps_upper, {1, 1, 1})), c.sample.label);
        }
    }
}

TEST(EvaluateDataset, CardinalityAndDeterminism)
{
    std::mt19937_64 rng(8);
    std::vector<Model> models{random_conv_network(rng, 4, 4, 3, 3), random_conv_network(rng, 4, 4, 3, 3)};
    models[1] = Model("second", models[1].input_shape(), models[1].layers());
    Dataset d;
    d.class_names = {"a", "b", "c"};
    for (int i = 0; i < 3; ++i)
        d.samples.push_back({random_image(rng, {4, 4, 3}), static_cast<std::size_t>(i), "s" + std::to_string(i)});
    for (const auto &spec : {PerturbationSpec::haze(), PerturbationSpec::contrast(), PerturbationSpec::blur()}) {
        const ResultSet one = evaluate_dataset(models, d, spec, 0.002, 1);
        const ResultSet four = evaluate_dataset(models, d, spec, 0.002, 4);
        EXPECT_EQ(one.entries.size(), 6u);
        ASSERT_EQ(four.entries.size(), 6u);
        for (const auto &[key, entry] : one.entries) {
            const auto &other = four.entries.at(key).interval;
            EXPECT_EQ(entry.interval.status, other.status);
            EXPECT_EQ(entry.interval.eps_lower, other.eps_lower);
            EXPECT_EQ(entry.interval.eps_upper, other.eps_upper);
            EXPECT_EQ(entry.interval.label_at_upper, other.label_at_upper);
        }
    }
}

TEST(EvaluateDataset, AllCorrectVersusAllWrong)
{
    std::mt19937_64 rng(12);
    const Model a = random_dense_network(rng, 5, {6}, 2);
    const Model b = flipped_labels_model(a);
    Dataset d;
    d.class_names = {"zero", "one"};
    for (int i = 0; i < 8; ++i) {
        ImageSample s = correctly_labelled(a, random_image(rng, {1, 5, 1}), "s" + std::to_string(i));
        const auto logits = forward(a, s.image);
        if (std::abs(logits[0] - logits[1]) < 1e-4f)
            continue;
        d.samples.push_back(std::move(s));
    }
    const std::vector<Model> models{a, b};
    const ResultSet r = evaluate_dataset(models, d, PerturbationSpec::haze());
    for (const auto &e : r.for_model(a.id()))
        EXPECT_NE(e.interval.status, IntervalStatus::misclassified_at_zero);
    for (const auto &e : r.for_model(b.id()))
        EXPECT_EQ(e.interval.status, IntervalStatus::misclassified_at_zero);
}

TEST(EvaluateDataset, ShapeMismatch)
{
    const std::vector<Model> models{constant_model({2, 2, 3}, 2, 0)};
    Dataset d;
    d.class_names = {"a", "b"};
    d.samples.push_back({Tensor({3, 3, 3}, 0.5f), 0, "s"});
    EXPECT_THROW(evaluate_dataset(models, d, PerturbationSpec::haze()), ShapeError);
}

TEST(Counterexample, FlipFound)
{
    const FlipCase c = flip_model(0.2, 0.369);
    const auto r = robustness_interval(c.model, c.sample, PerturbationSpec::haze());
    const auto cex = generate_counterexample(c.model, c.sample, r, PerturbationSpec::haze());
    ASSERT_TRUE(cex);
    EXPECT_EQ(cex->eps, r.eps_upper);
    EXPECT_NE(cex->predicted_label, cex->true_label);
    EXPECT_EQ(cex->perturbed_image, apply_haze(c.sample.image, r.eps_upper, {1, 1, 1}));
}

TEST(Counterexample, RobustHasNone)
{
    const Model m = constant_model({1, 1, 1}, 2, 0);
    const ImageSample s{Tensor({1, 1, 1}, 0.5f), 0, "s"};
    const auto r = robustness_interval(m, s, PerturbationSpec::haze());
    EXPECT_FALSE(generate_counterexample(m, s, r, PerturbationSpec::haze()));
}

TEST(Counterexample, MisclassifiedIsCleanImage)
{
    const Model m = constant_model({1, 1, 1}, 2, 1);
    const ImageSample s{Tensor({1, 1, 1}, 0.25f), 0, "s"};
    const auto r = robustness_interval(m, s, PerturbationSpec::haze());
    const auto cex = generate_counterexample(m, s, r, PerturbationSpec::haze());
    ASSERT_TRUE(cex);
    EXPECT_EQ(cex->eps, 0.0);
    EXPECT_EQ(cex->perturbed_image, s.image);
}

TEST(Counterexample, StaleEvidenceIsInconsistent)
{
    const FlipCase c = flip_model(0.2, 0.37);
    auto r = robustness_interval(c.model, c.sample, PerturbationSpec::haze());
    r.eps_upper = 0.1;
    EXPECT_THROW(generate_counterexample(c.model, c.sample, r, PerturbationSpec::haze()), InconsistencyError);
}

TEST(ResultSetCsv, RoundTrip)
{
    TempDir dir;
    const FlipCase c = flip_model(0.1, 0.6180339887);
    const std::vector<Model> models{c.model};
    Dataset d;
    d.class_names = {"a", "b"};
    d.samples.push_back(c.sample);
    const ResultSet r = evaluate_dataset(models, d, PerturbationSpec::haze());
    write_result_set_csv(r, dir / "r.csv");
    const ResultSet back = read_result_set_csv(dir / "r.csv");
    ASSERT_EQ(back.entries.size(), 1u);
    const auto &a = r.entries.begin()->second.interval;
    const auto &b = back.entries.begin()->second.interval;
    EXPECT_EQ(a.eps_lower, b.eps_lower);
    EXPECT_EQ(a.eps_upper, b.eps_upper);
    EXPECT_EQ(a.status, b.status);
}
