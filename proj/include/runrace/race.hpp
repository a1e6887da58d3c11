#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "runrace/criteria.hpp"

namespace runrace {

struct RaceConfig {
    int horizon_T = 0;
    HaltPolicy policy;
    InferenceConfig inference;
    std::uint64_t master_seed = 0;

    bool operator==(const RaceConfig&) const = default;
    void validate() const;
};

struct EpochThreshold {
    int epoch = 0;
    ThresholdSpec spec;

    bool operator==(const EpochThreshold&) const = default;
};

struct EpochDecisions {
    int epoch = 0;
    std::map<std::string, Decision> decisions;
};

struct RaceState {
    std::map<std::string, LearningCurve> curves;
    int epoch = 0;  // completed epochs
    int initial_runs = 0;
    std::vector<EpochThreshold> thresholds_history;
    std::vector<EpochDecisions> decisions_history;

    std::vector<std::string> alive_ids() const;
};

// Per-(run, epoch) inference streams derive from the master seed only, so a
// run's prediction at an epoch does not depend on the policy being evaluated.
std::uint64_t fit_seed(std::uint64_t master_seed, const std::string& run_id, int epoch);

// Pluggable fit so callers can memoize across policies. The default runs the
// sampler directly.
using FitProvider =
    std::function<CurveFit(const LearningCurve& curve, const InferenceConfig& config,
                           std::uint64_t seed)>;

FitProvider default_fit_provider();

// Memoizing wrapper keyed on (run_id, observed epochs). Only valid while the
// underlying traces, config, and master seed stay fixed.
class MemoFitProvider {
public:
    FitProvider provider();

private:
    std::map<std::pair<std::string, int>, CurveFit> cache_;
};

// Advance one epoch: ingest one observation per alive run, then decide who
// continues. Decisions run after warmup and never at the final epoch; a
// non-finite observation halts its run with reason data-error.
void step(RaceState& state, const std::map<std::string, double>& observations,
          const RaceConfig& config, const FitProvider& fit = default_fit_provider());

struct FailRecord {
    std::string best_run_id;
    int halt_epoch = 0;
    double best_final_error = 0.0;
    // empty when every run was halted
    std::optional<double> surviving_best_final_error;

    bool operator==(const FailRecord&) const = default;
};

struct RunOutcome {
    bool halted = false;
    int epochs_consumed = 0;
    std::string reason;  // "finished" or the halt reason

    bool operator==(const RunOutcome&) const = default;
};

struct RaceReport {
    Criterion criterion = Criterion::A;
    double delta = 0.0;
    bool guards_enabled = false;
    std::uint64_t master_seed = 0;
    int horizon_T = 0;
    long long epochs_executed = 0;
    long long epochs_budgeted = 0;
    double savings = 0.0;  // 1 - executed/budgeted, in [0, 1)
    std::optional<FailRecord> fail;
    std::map<std::string, RunOutcome> per_run;
    std::vector<EpochThreshold> thresholds;
    std::vector<std::pair<int, std::vector<std::string>>> halts_by_epoch;

    bool operator==(const RaceReport&) const = default;
};

using TraceMap = std::map<std::string, std::vector<double>>;

// Replay complete traces through the decision loop. Pure function of
// (traces, config): halted runs stop consuming epochs, survivors finish.
RaceReport run_race(const TraceMap& traces, const RaceConfig& config,
                    const FitProvider& fit = default_fit_provider());

// FAIL iff the run with the lowest final trace error was halted; a tie FAILs
// only when every tied-best run was halted.
std::optional<FailRecord> detect_fail(const std::map<std::string, RunOutcome>& outcomes,
                                      const TraceMap& traces);

struct SynthConfig {
    int n_runs = 20;
    int horizon_T = 50;
    double noise_sigma = 0.02;
    double y_cap = 1.0;                 // clean curves stay in [0, y_cap]
    double min_final_gap = 0.0;         // pairwise spacing of final clean values
    double min_total_drop = 0.0;        // required clean descent g(1) - g(T)
    // Fraction of the total descent that must already be realized by epoch
    // max(2, ceil(T/10)). Nonzero values reject flat-then-cliff shapes that
    // no extrapolator can see coming.
    double min_early_frac = 0.0;
    bool require_improving = true;      // g(T) <= g(1)
    std::vector<FamilyId> family_mix;   // empty = all families
    std::uint64_t seed = 0;
};

struct SynthTruth {
    FamilyId family = FamilyId::Pow3;
    std::vector<double> params;
    double offset = 0.0;
    double final_value = 0.0;  // clean curve value at the budget epoch

    bool operator==(const SynthTruth&) const = default;
};

struct SyntheticRace {
    TraceMap traces;
    std::map<std::string, SynthTruth> truth;
    std::string best_run_id;  // lowest clean final value
    int horizon_T = 0;
};

SyntheticRace gen_synthetic(const SynthConfig& config);

struct SweepCell {
    Criterion criterion = Criterion::A;
    double delta = 0.0;
    RaceReport report;

    bool operator==(const SweepCell&) const = default;
};

// Full criteria x delta grid over one corpus. Cells share the master seed
// (predictions are policy-independent) and a fit cache.
std::vector<SweepCell> sweep(const TraceMap& traces, const std::vector<Criterion>& criteria,
                             const std::vector<double>& deltas, const RaceConfig& base_config);

}  // namespace runrace
