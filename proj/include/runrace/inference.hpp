#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "runrace/curve_models.hpp"

namespace runrace {

enum class RunState { Alive, Halted, Finished };

// A validation-error trace. values[i] is the error observed at epoch i+1:
// epochs are dense, starting at 1. A halted curve stores nothing past its
// halt epoch.
struct LearningCurve {
    std::string run_id;
    std::vector<double> values;
    int horizon_T = 0;
    RunState state = RunState::Alive;
    int halt_epoch = 0;        // meaningful when state == Halted
    std::string halt_reason;   // ditto

    int observed() const { return static_cast<int>(values.size()); }
};

enum class ValidityReason { Ok, NegativeLoss, LowCorrelation, InsufficientData };

const char* validity_reason_name(ValidityReason r);

// Posterior predictive summary of one run's error at the budget epoch T.
struct Prediction {
    std::vector<double> samples;    // one value per kept posterior sample
    double point_estimate = 0.0;    // sample mean
    double conservative_estimate = 0.0;  // nearest-rank (1-delta)-quantile
    bool valid = true;
    ValidityReason reason = ValidityReason::Ok;
};

struct InferenceConfig {
    int chain_length = 3000;
    int burn_in = 1000;
    int thinning = 20;
    // Proposal step sizes as fractions of each bound width (logit / log-sigma
    // blocks use them as absolute scales). A single entry broadcasts.
    std::vector<double> proposal_scales = {0.15};
    std::uint64_t seed = 0;
    double quantile_delta = 0.05;   // level for the conservative estimate

    bool operator==(const InferenceConfig&) const = default;
    void validate() const;
};

// Gaussian observation model: sum over observed epochs of
// log N(y_t; ensemble(t), sigma^2). -inf when sigma is not positive.
double log_likelihood(const ModelSpace& space, const EnsembleSample& sample,
                      const LearningCurve& curve);

// Uniform prior over the support box: 0 when all params are inside bounds,
// offsets are in [0, y_cap], weights form a simplex point (1e-9 tolerance),
// and sigma is in (1e-4, y_cap]; -inf otherwise.
double log_prior(const ModelSpace& space, const EnsembleSample& sample);

// Single-chain random-walk Metropolis over (params, offsets, weight logits,
// log sigma). Returns floor((chain_length - burn_in) / thinning) samples, all
// with log_prior == 0. Deterministic given (curve, config.seed).
struct McmcResult {
    ModelSpace space;
    std::vector<EnsembleSample> samples;
};
McmcResult mh_sample(const LearningCurve& curve, const InferenceConfig& config);

// Ensemble values of each posterior sample at epoch t plus the summary
// estimates. quantile_delta sets the conservative level (1 - delta).
Prediction predict_at(const ModelSpace& space, std::span<const EnsembleSample> samples, double t,
                      double quantile_delta);

// Fraction of prediction samples strictly below threshold.
double prob_below(const Prediction& prediction, double threshold);

// Validity rules, checked in order: fewer than 3 observations ->
// insufficient-data; point estimate < 0 -> negative-loss; Pearson correlation
// between the posterior-mean fitted curve and the observations < 0.5 ->
// low-correlation; otherwise ok.
std::pair<bool, ValidityReason> check_validity(const Prediction& prediction,
                                               const LearningCurve& curve,
                                               std::span<const double> fitted_mean);

// delta-independent fit product. Race code derives per-delta Predictions from
// one of these, so fits can be shared across policies.
struct CurveFit {
    std::vector<double> values_at_horizon;  // ensemble value per kept sample
    std::vector<double> fitted_mean;        // posterior-mean curve at observed epochs
};

CurveFit fit_curve(const LearningCurve& curve, const InferenceConfig& config);

Prediction prediction_from_fit(const CurveFit& fit, const LearningCurve& curve, double delta);

}  // namespace runrace
