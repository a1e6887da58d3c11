#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "runrace/curve_models.hpp"
#include "runrace/errors.hpp"
#include "runrace/inference.hpp"
#include "runrace/rng.hpp"
#include "runrace/stats.hpp"

using namespace runrace;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

LearningCurve make_curve(std::vector<double> values, int horizon = 50) {
    LearningCurve c;
    c.run_id = "run-x";
    c.values = std::move(values);
    c.horizon_T = horizon;
    return c;
}

// In-support sample whose ensemble values are whatever they are; the curve is
// then built FROM those values so residuals vanish exactly.
EnsembleSample in_bounds_sample(const ModelSpace& space, std::uint64_t seed, double sigma) {
    EnsembleSample s;
    s.params.resize(space.families.size());
    s.offsets.resize(space.families.size());
    s.weights.assign(space.families.size(), 1.0 / static_cast<double>(space.families.size()));
    Rng rng(seed);
    for (std::size_t k = 0; k < space.families.size(); ++k) {
        s.params[k] = init_params(space.families[k], rng);
        s.offsets[k] = init_offset(space, space.families[k], s.params[k], rng);
    }
    s.noise_sigma = sigma;
    return s;
}

// Prediction backed by literal sample values: single pow3 atom, offset solved
// per sample so the ensemble value at t equals the requested number.
std::vector<EnsembleSample> samples_with_values(const ModelSpace& space,
                                                const std::vector<double>& targets, double t) {
    std::vector<EnsembleSample> out;
    std::size_t k3 = static_cast<std::size_t>(FamilyId::Pow3);
    for (double target : targets) {
        EnsembleSample s = in_bounds_sample(space, 77, 0.1);
        s.weights.assign(space.families.size(), 0.0);
        s.weights[k3] = 1.0;
        s.offsets[k3] = target + eval_model(space.families[k3], s.params[k3], t);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("log_likelihood: zero-residual and single-point forms") {
    ModelSpace space = ModelSpace::make(5.0, 50);
    EnsembleSample s = in_bounds_sample(space, 3, 1.0);

    std::vector<double> fitted;
    for (int t = 1; t <= 4; ++t) fitted.push_back(eval_ensemble(space, s, t));
    LearningCurve exact = make_curve(fitted);
    CHECK(log_likelihood(space, s, exact) == doctest::Approx(-2.0 * kLog2Pi).epsilon(1e-12));

    // one point with residual r at sigma 1
    double r = 0.37;
    LearningCurve one = make_curve({eval_ensemble(space, s, 1.0) + r});
    CHECK(log_likelihood(space, s, one) ==
          doctest::Approx(-0.5 * kLog2Pi - r * r / 2.0).epsilon(1e-12));

    // doubling sigma on a zero-residual fit strictly lowers the value
    EnsembleSample wide = s;
    wide.noise_sigma = 2.0;
    CHECK(log_likelihood(space, wide, exact) < log_likelihood(space, s, exact));

    // invalid sigma is the -inf sentinel
    EnsembleSample bad = s;
    bad.noise_sigma = 0.0;
    CHECK(log_likelihood(space, bad, exact) == -std::numeric_limits<double>::infinity());

    CHECK_THROWS_AS(log_likelihood(space, s, make_curve({})), InsufficientDataError);
}

TEST_CASE("log_prior: support box") {
    ModelSpace space = ModelSpace::make(5.0, 50);
    EnsembleSample s = in_bounds_sample(space, 11, 0.4);
    CHECK(log_prior(space, s) == 0.0);

    EnsembleSample esc = s;
    esc.params[0][0] = space.families[0].bounds[0].hi + 1.0;
    CHECK(log_prior(space, esc) == -std::numeric_limits<double>::infinity());

    EnsembleSample heavy = s;
    for (double& w : heavy.weights) w *= 1.5;
    CHECK(log_prior(space, heavy) == -std::numeric_limits<double>::infinity());

    EnsembleSample off = s;
    off.offsets[2] = -0.1;
    CHECK(log_prior(space, off) == -std::numeric_limits<double>::infinity());

    EnsembleSample noisy = s;
    noisy.noise_sigma = space.y_cap * 1.01;
    CHECK(log_prior(space, noisy) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("mh_sample: count, determinism, in-support samples") {
    LearningCurve curve = make_curve({0.9, 0.7, 0.6, 0.55, 0.5, 0.48, 0.46, 0.45}, 30);
    InferenceConfig config;
    config.chain_length = 1500;
    config.burn_in = 500;
    config.thinning = 10;
    config.seed = 9;

    McmcResult r1 = mh_sample(curve, config);
    CHECK(r1.samples.size() == 100);
    for (const EnsembleSample& s : r1.samples) {
        REQUIRE(log_prior(r1.space, s) == 0.0);
    }

    McmcResult r2 = mh_sample(curve, config);
    REQUIRE(r2.samples.size() == r1.samples.size());
    for (std::size_t i = 0; i < r1.samples.size(); ++i) {
        CHECK(r1.samples[i].params == r2.samples[i].params);
        CHECK(r1.samples[i].offsets == r2.samples[i].offsets);
        CHECK(r1.samples[i].weights == r2.samples[i].weights);
        CHECK(r1.samples[i].noise_sigma == r2.samples[i].noise_sigma);
    }

    config.seed = 10;
    McmcResult r3 = mh_sample(curve, config);
    bool all_same = true;
    for (std::size_t i = 0; i < r1.samples.size() && all_same; ++i) {
        all_same = r1.samples[i].offsets == r3.samples[i].offsets;
    }
    CHECK_FALSE(all_same);

    CHECK_THROWS_AS(mh_sample(make_curve({}), config), InsufficientDataError);
}

TEST_CASE("predict_at: counting-rule examples") {
    ModelSpace space = ModelSpace::make(2.0, 50);

    auto quad = samples_with_values(space, {0.2, 0.4, 0.6, 0.8}, 50.0);
    Prediction p = predict_at(space, quad, 50.0, 0.5);
    REQUIRE(p.samples.size() == 4);
    CHECK(p.point_estimate == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.conservative_estimate == doctest::Approx(0.4).epsilon(1e-12));

    auto five = samples_with_values(space, {0.1, 0.3, 0.5, 0.7, 0.9}, 50.0);
    Prediction q = predict_at(space, five, 50.0, 0.25);
    CHECK(q.conservative_estimate == doctest::Approx(0.7).epsilon(1e-12));

    auto lone = samples_with_values(space, {0.42}, 50.0);
    Prediction single = predict_at(space, lone, 50.0, 0.5);
    CHECK(single.point_estimate == doctest::Approx(0.42).epsilon(1e-12));
    CHECK(single.conservative_estimate == doctest::Approx(0.42).epsilon(1e-12));

    CHECK_THROWS_AS(predict_at(space, {}, 50.0, 0.5), DomainError);
}

TEST_CASE("prob_below counts strictly") {
    Prediction p;
    p.samples = {0.1, 0.2, 0.2, 0.3, 0.5};
    CHECK(prob_below(p, 0.2) == doctest::Approx(0.2));   // only 0.1
    CHECK(prob_below(p, 0.21) == doctest::Approx(0.6));  // 0.1 and both 0.2s
    CHECK(prob_below(p, 0.05) == 0.0);
    CHECK(prob_below(p, 9.0) == 1.0);
    Prediction empty;
    CHECK_THROWS_AS(prob_below(empty, 0.5), DomainError);
}

TEST_CASE("check_validity: rules in order") {
    Prediction p;
    p.samples = {0.3, 0.4};
    p.point_estimate = 0.35;

    LearningCurve two = make_curve({0.5, 0.4});
    std::vector<double> fit2 = {0.5, 0.4};
    auto [v1, r1] = check_validity(p, two, fit2);
    CHECK_FALSE(v1);
    CHECK(r1 == ValidityReason::InsufficientData);

    LearningCurve four = make_curve({0.5, 0.4, 0.35, 0.3});
    std::vector<double> fit4 = {0.5, 0.41, 0.34, 0.31};

    Prediction neg = p;
    neg.point_estimate = -0.02;
    auto [v2, r2] = check_validity(neg, four, fit4);
    CHECK_FALSE(v2);
    CHECK(r2 == ValidityReason::NegativeLoss);

    std::vector<double> anti = {0.3, 0.36, 0.44, 0.52};  // fitted rises, data falls
    auto [v3, r3] = check_validity(p, four, anti);
    CHECK_FALSE(v3);
    CHECK(r3 == ValidityReason::LowCorrelation);

    auto [v4, r4] = check_validity(p, four, fit4);
    CHECK(v4);
    CHECK(r4 == ValidityReason::Ok);

    std::vector<double> short_fit = {0.5};
    CHECK_THROWS_AS(check_validity(p, four, short_fit), DomainError);
}

TEST_CASE("fit_curve feeds prediction_from_fit consistently") {
    LearningCurve curve = make_curve({0.8, 0.6, 0.5, 0.45, 0.42, 0.41, 0.4, 0.39, 0.385, 0.38},
                                     40);
    InferenceConfig config;
    config.chain_length = 1500;
    config.burn_in = 500;
    config.thinning = 10;
    config.seed = 4;

    CurveFit fit = fit_curve(curve, config);
    CHECK(fit.values_at_horizon.size() == 100);
    CHECK(fit.fitted_mean.size() == 10);

    CurveFit again = fit_curve(curve, config);
    CHECK(fit.values_at_horizon == again.values_at_horizon);
    CHECK(fit.fitted_mean == again.fitted_mean);

    Prediction p = prediction_from_fit(fit, curve, 0.05);
    CHECK(p.samples == fit.values_at_horizon);
    CHECK(p.point_estimate == doctest::Approx(mean(fit.values_at_horizon)));
    CHECK(p.conservative_estimate ==
          doctest::Approx(nearest_rank_quantile(fit.values_at_horizon, 0.95)));

    // the fit product matches mh_sample + predict_at on the same seed
    McmcResult mcmc = mh_sample(curve, config);
    Prediction direct = predict_at(mcmc.space, mcmc.samples, 40.0, 0.05);
    REQUIRE(direct.samples.size() == p.samples.size());
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
        CHECK(p.samples[i] == doctest::Approx(direct.samples[i]).epsilon(1e-12));
    }

    CHECK_THROWS_AS(prediction_from_fit(CurveFit{}, curve, 0.05), DomainError);
}

TEST_CASE("noise-free pow3 recovery, single-seed smoke") {
    // clean curve 0.30 + 0.5 * t^-0.8, 25 of 50 epochs; the sampler should
    // recover the value at the budget epoch within a couple of hundredths
    LearningCurve curve;
    curve.run_id = "pow3";
    curve.horizon_T = 50;
    for (int t = 1; t <= 25; ++t) {
        curve.values.push_back(0.30 + 0.5 * std::pow(static_cast<double>(t), -0.8));
    }
    const double truth = 0.30 + 0.5 * std::pow(50.0, -0.8);

    InferenceConfig config;  // full-length default chain
    config.seed = 3;
    CurveFit fit = fit_curve(curve, config);
    Prediction p = prediction_from_fit(fit, curve, 0.05);
    CHECK(p.valid);
    CHECK(std::abs(p.point_estimate - truth) <= 0.02);
}

TEST_CASE("inference config validation") {
    InferenceConfig c;
    c.chain_length = 0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = InferenceConfig{};
    c.burn_in = c.chain_length;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = InferenceConfig{};
    c.thinning = 0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = InferenceConfig{};
    c.thinning = c.chain_length;  // keeps no sample
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = InferenceConfig{};
    c.proposal_scales = {};
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = InferenceConfig{};
    c.proposal_scales = {0.0};
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = InferenceConfig{};
    c.quantile_delta = 0.0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = InferenceConfig{};
    CHECK_NOTHROW(c.validate());
}
