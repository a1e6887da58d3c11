#include "runrace/criteria.hpp"

#include <algorithm>
#include <cmath>

#include "runrace/errors.hpp"
#include "runrace/stats.hpp"

namespace runrace {

namespace {

const char* kCriterionNames[] = {"a", "b", "c", "d", "e", "f", "successive-halving"};

// Current best = lowest current error, ties toward the lowest run id.
const RunView* current_best(std::span<const RunView> runs) {
    const RunView* best = nullptr;
    for (const RunView& r : runs) {
        if (best == nullptr || r.current_error < best->current_error ||
            (r.current_error == best->current_error && r.run_id < best->run_id)) {
            best = &r;
        }
    }
    return best;
}

ThresholdSpec criterion_a(std::span<const RunView> runs) {
    const RunView* best = current_best(runs);
    ThresholdSpec spec;
    spec.criterion = Criterion::A;
    spec.tau = best->current_error;
    spec.source_run = best->run_id;
    return spec;
}

}  // namespace

std::string criterion_name(Criterion c) { return kCriterionNames[static_cast<int>(c)]; }

Criterion criterion_from_name(const std::string& name) {
    for (int i = 0; i < 7; ++i) {
        if (name == kCriterionNames[i]) return static_cast<Criterion>(i);
    }
    if (name == "sh") return Criterion::SuccessiveHalving;
    throw DomainError("unknown criterion: " + name);
}

void HaltPolicy::validate() const {
    if (!(delta >= 0.0 && delta <= 1.0)) throw DomainError("HaltPolicy: delta must be in [0, 1]");
    if (warmup_epochs < 1) throw DomainError("HaltPolicy: warmup_epochs must be >= 1");
    if (k_override && *k_override < 1) throw DomainError("HaltPolicy: k_override must be >= 1");
}

int select_k(int n, double delta) {
    if (n < 1) throw DomainError("select_k: n must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("select_k: delta must be in (0, 1)");
    const double nd = static_cast<double>(n) * delta;
    const double s = std::sqrt(nd * (1.0 - delta));
    auto satisfies = [&](long k) {
        return normal_upper_tail((static_cast<double>(k) - nd) / s) <= delta;
    };
    // warm start from the quantile form, then settle the boundary exactly
    long k = static_cast<long>(std::ceil(nd + normal_tail_quantile(delta) * s));
    k = std::clamp(k, 1L, static_cast<long>(n));
    while (k > 1 && satisfies(k - 1)) --k;
    while (k < n && !satisfies(k)) ++k;
    return static_cast<int>(k);
}

ThresholdSpec compute_threshold(Criterion criterion, std::span<const RunView> runs, double delta,
                                std::optional<int> k_override) {
    if (runs.empty()) throw DomainError("compute_threshold: no alive runs");
    if (criterion == Criterion::SuccessiveHalving) {
        throw DomainError("compute_threshold: successive-halving has no threshold");
    }
    if (criterion == Criterion::A) return criterion_a(runs);

    auto fall_back = [&]() {
        ThresholdSpec spec = criterion_a(runs);
        spec.criterion = criterion;
        spec.fell_back_to_a = true;
        return spec;
    };

    if (criterion == Criterion::B || criterion == Criterion::C) {
        const RunView* best = current_best(runs);
        if (best->prediction == nullptr || !best->prediction->valid) return fall_back();
        ThresholdSpec spec;
        spec.criterion = criterion;
        spec.source_run = best->run_id;
        spec.tau = criterion == Criterion::B ? best->prediction->point_estimate
                                             : best->prediction->conservative_estimate;
        return spec;
    }

    std::vector<double> pts, cons;
    for (const RunView& r : runs) {
        if (r.prediction != nullptr && r.prediction->valid) {
            pts.push_back(r.prediction->point_estimate);
            cons.push_back(r.prediction->conservative_estimate);
        }
    }
    if (pts.empty()) return fall_back();

    ThresholdSpec spec;
    spec.criterion = criterion;
    if (criterion == Criterion::D) {
        spec.tau = *std::min_element(pts.begin(), pts.end());
    } else if (criterion == Criterion::E) {
        spec.tau = *std::min_element(cons.begin(), cons.end());
    } else {
        // criterion f: k-th smallest conservative estimate among the n runs
        // that actually have valid predictions
        double kd = std::clamp(delta, 1e-9, 1.0 - 1e-9);
        int k = k_override ? *k_override : select_k(static_cast<int>(cons.size()), kd);
        k = std::clamp(k, 1, static_cast<int>(cons.size()));
        std::sort(cons.begin(), cons.end());
        spec.tau = cons[static_cast<std::size_t>(k - 1)];
        spec.k_used = k;
    }
    return spec;
}

Decision decide(const Prediction& prediction, double tau, double delta) {
    Decision d;
    d.tau = tau;
    d.probability = prob_below(prediction, tau);
    d.halt = d.probability < delta;
    d.reason = d.halt ? "prob-below-delta" : "prob-at-least-delta";
    return d;
}

std::map<std::string, Decision> apply_guards(std::map<std::string, Decision> decisions,
                                             std::span<const RunView> runs,
                                             const HaltPolicy& policy) {
    if (!policy.guards_enabled) return decisions;

    const bool prediction_based = policy.criterion != Criterion::A &&
                                  policy.criterion != Criterion::SuccessiveHalving;
    if (prediction_based) {
        double tau_a = current_best(runs)->current_error;
        for (const RunView& r : runs) {
            auto it = decisions.find(r.run_id);
            if (it == decisions.end()) continue;
            if (r.prediction != nullptr && !r.prediction->valid) {
                Decision d = decide(*r.prediction, tau_a, policy.delta);
                d.reason += "-fallback-a";
                it->second = d;
            }
        }
    }

    const RunView* best = current_best(runs);
    auto it = decisions.find(best->run_id);
    if (it != decisions.end() && it->second.halt) {
        it->second.halt = false;
        it->second.reason = "guard-current-best";
    }
    return decisions;
}

std::vector<int> successive_halving_epochs(int horizon_T) {
    if (horizon_T < 2) throw DomainError("successive_halving_epochs: horizon must be >= 2");
    std::vector<int> epochs;
    for (int e = horizon_T / 2; e >= 1; e /= 2) {
        epochs.push_back(e);
        if (e == 1) break;
    }
    std::sort(epochs.begin(), epochs.end());
    epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());
    return epochs;
}

std::map<std::string, Decision> successive_halving_decisions(std::span<const RunView> runs,
                                                             int epoch, int horizon_T) {
    std::map<std::string, Decision> out;
    for (const RunView& r : runs) {
        Decision d;
        d.reason = "successive-halving-keep";
        out[r.run_id] = d;
    }
    std::vector<int> halving = successive_halving_epochs(horizon_T);
    if (!std::binary_search(halving.begin(), halving.end(), epoch) || runs.size() < 2) {
        return out;
    }
    std::vector<const RunView*> order;
    for (const RunView& r : runs) order.push_back(&r);
    // worst first; equal errors break toward halting the higher run id
    std::sort(order.begin(), order.end(), [](const RunView* x, const RunView* y) {
        if (x->current_error != y->current_error) return x->current_error > y->current_error;
        return x->run_id > y->run_id;
    });
    std::size_t to_halt = (order.size() + 1) / 2;
    to_halt = std::min(to_halt, order.size() - 1);  // keep at least one
    for (std::size_t i = 0; i < to_halt; ++i) {
        Decision& d = out[order[i]->run_id];
        d.halt = true;
        d.reason = "successive-halving-prune";
    }
    return out;
}

}  // namespace runrace
