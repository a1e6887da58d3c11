#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "runrace/inference.hpp"

namespace runrace {

// Halting criteria. Each one picks a threshold tau; a run halts when the
// probability of its predicted final error beating tau drops below delta.
//   a  best current observed error
//   b  point estimate of the current best run's prediction
//   c  conservative estimate of the current best run's prediction
//   d  smallest point estimate across runs
//   e  smallest conservative estimate across runs
//   f  k-th smallest conservative estimate, k from select_k
//   successive_halving  comparison baseline, prediction-free
enum class Criterion { A, B, C, D, E, F, SuccessiveHalving };

std::string criterion_name(Criterion c);
Criterion criterion_from_name(const std::string& name);

struct HaltPolicy {
    Criterion criterion = Criterion::F;
    double delta = 0.5;          // in [0, 1]; 0 disables halting entirely
    bool guards_enabled = false;
    int warmup_epochs = 5;       // no predictions before this many observations
    std::optional<int> k_override;  // criterion f only

    bool operator==(const HaltPolicy&) const = default;
    void validate() const;
};

// Smallest k >= 1 with P(N(0,1) >= (k - n*delta) / sqrt(n*delta*(1-delta)))
// <= delta, clamped to [1, n]. delta must lie in (0, 1).
int select_k(int n, double delta);

// Snapshot of one alive run at a decision epoch.
struct RunView {
    std::string run_id;
    double current_error = 0.0;
    const Prediction* prediction = nullptr;  // null before warmup
};

struct ThresholdSpec {
    Criterion criterion = Criterion::A;
    double tau = 0.0;
    std::optional<int> k_used;               // criterion f
    std::optional<std::string> source_run;   // criteria a-c
    bool fell_back_to_a = false;  // b-f with no usable valid prediction

    bool operator==(const ThresholdSpec&) const = default;
};

// tau per criterion over valid predictions of alive runs. Falls back to
// criterion (a)'s value when b-f have no valid prediction to read. Current
// best ties break toward the lowest run id.
ThresholdSpec compute_threshold(Criterion criterion, std::span<const RunView> runs, double delta,
                                std::optional<int> k_override = std::nullopt);

struct Decision {
    bool halt = false;
    double probability = 0.0;  // prob_below(prediction, tau)
    double tau = 0.0;
    std::string reason;
};

// Halt iff prob_below(prediction, tau) < delta, strictly. Equality continues;
// delta = 0 never halts.
Decision decide(const Prediction& prediction, double tau, double delta);

// Decision-level protections, applied only when policy.guards_enabled:
//   i    the current-best run is never halted
//   ii/iii  runs with invalid predictions are exempt from prediction-based
//           thresholds and are re-decided against criterion (a)'s threshold
// Pass-through when guards are disabled.
std::map<std::string, Decision> apply_guards(std::map<std::string, Decision> decisions,
                                             std::span<const RunView> runs,
                                             const HaltPolicy& policy);

// Epochs at which the successive-halving baseline prunes: T / 2^j, ascending,
// deduplicated, all >= 1 and < T.
std::vector<int> successive_halving_epochs(int horizon_T);

// Baseline decisions: at halving epochs, halt the worst ceil(alive/2) runs by
// current error (ties toward higher run id survive last). Never halts the
// final remaining run.
std::map<std::string, Decision> successive_halving_decisions(std::span<const RunView> runs,
                                                             int epoch, int horizon_T);

}  // namespace runrace
