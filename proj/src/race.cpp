#include "runrace/race.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "runrace/errors.hpp"
#include "runrace/rng.hpp"

namespace runrace {

void RaceConfig::validate() const {
    if (horizon_T < 2) throw DomainError("RaceConfig: horizon_T must be >= 2");
    policy.validate();
    inference.validate();
}

std::vector<std::string> RaceState::alive_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, curve] : curves) {
        if (curve.state == RunState::Alive) out.push_back(id);
    }
    return out;
}

std::uint64_t fit_seed(std::uint64_t master_seed, const std::string& run_id, int epoch) {
    return mix_seed({master_seed, fnv1a64(run_id), static_cast<std::uint64_t>(epoch), 0xF17ull});
}

FitProvider default_fit_provider() {
    return [](const LearningCurve& curve, const InferenceConfig& config, std::uint64_t seed) {
        InferenceConfig cfg = config;
        cfg.seed = seed;
        return fit_curve(curve, cfg);
    };
}

FitProvider MemoFitProvider::provider() {
    return [this](const LearningCurve& curve, const InferenceConfig& config, std::uint64_t seed) {
        auto key = std::make_pair(curve.run_id, curve.observed());
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        InferenceConfig cfg = config;
        cfg.seed = seed;
        CurveFit fit = fit_curve(curve, cfg);
        cache_.emplace(key, fit);
        return fit;
    };
}

namespace {

void halt_run(LearningCurve& curve, int epoch, const std::string& reason) {
    curve.state = RunState::Halted;
    curve.halt_epoch = epoch;
    curve.halt_reason = reason;
}

}  // namespace

void step(RaceState& state, const std::map<std::string, double>& observations,
          const RaceConfig& config, const FitProvider& fit) {
    config.validate();
    if (state.epoch >= config.horizon_T) {
        throw ProtocolError("step: race already ran to its budget epoch");
    }
    const int t = state.epoch + 1;

    // exactly one observation per alive run
    for (const auto& [id, value] : observations) {
        auto it = state.curves.find(id);
        if (it == state.curves.end()) throw NotFoundError("step: unknown run " + id);
        if (it->second.state != RunState::Alive) {
            throw ProtocolError("step: observation for non-alive run " + id);
        }
        (void)value;
    }
    std::map<std::string, Decision> decisions;
    for (auto& [id, curve] : state.curves) {
        if (curve.state != RunState::Alive) continue;
        auto it = observations.find(id);
        if (it == observations.end()) {
            throw ProtocolError("step: missing observation for alive run " + id);
        }
        if (!std::isfinite(it->second)) {
            halt_run(curve, t, "data-error");
            Decision d;
            d.halt = true;
            d.reason = "data-error";
            decisions[id] = d;
            continue;
        }
        curve.values.push_back(it->second);
    }

    const bool final_epoch = (t == config.horizon_T);
    const bool decide_now = !final_epoch && config.policy.delta > 0.0 &&
                            (config.policy.criterion == Criterion::SuccessiveHalving ||
                             t >= config.policy.warmup_epochs);

    if (decide_now) {
        std::vector<const LearningCurve*> alive;
        for (auto& [id, curve] : state.curves) {
            if (curve.state == RunState::Alive) alive.push_back(&curve);
        }
        if (!alive.empty()) {
            std::map<std::string, Decision> policy_decisions;
            std::vector<RunView> views(alive.size());
            std::vector<Prediction> predictions(alive.size());

            if (config.policy.criterion == Criterion::SuccessiveHalving) {
                for (std::size_t i = 0; i < alive.size(); ++i) {
                    views[i].run_id = alive[i]->run_id;
                    views[i].current_error = alive[i]->values.back();
                }
                policy_decisions = successive_halving_decisions(views, t, config.horizon_T);
                policy_decisions = apply_guards(std::move(policy_decisions), views, config.policy);
            } else {
                for (std::size_t i = 0; i < alive.size(); ++i) {
                    const LearningCurve& curve = *alive[i];
                    CurveFit cf = fit(curve, config.inference,
                                      fit_seed(config.master_seed, curve.run_id, t));
                    predictions[i] = prediction_from_fit(cf, curve, config.policy.delta);
                    views[i].run_id = curve.run_id;
                    views[i].current_error = curve.values.back();
                    views[i].prediction = &predictions[i];
                }
                ThresholdSpec spec = compute_threshold(config.policy.criterion, views,
                                                       config.policy.delta,
                                                       config.policy.k_override);
                state.thresholds_history.push_back({t, spec});
                for (std::size_t i = 0; i < alive.size(); ++i) {
                    policy_decisions[views[i].run_id] =
                        decide(*views[i].prediction, spec.tau, config.policy.delta);
                }
                policy_decisions = apply_guards(std::move(policy_decisions), views, config.policy);
            }

            for (const auto& [id, d] : policy_decisions) {
                decisions[id] = d;
                if (d.halt) halt_run(state.curves.at(id), t, d.reason);
            }
        }
    } else {
        for (auto& [id, curve] : state.curves) {
            if (curve.state != RunState::Alive) continue;
            if (decisions.count(id)) continue;
            Decision d;
            d.reason = final_epoch            ? "final-epoch"
                       : config.policy.delta <= 0.0 ? "delta-zero"
                                                    : "warmup";
            decisions[id] = d;
        }
    }

    state.epoch = t;
    if (final_epoch) {
        for (auto& [id, curve] : state.curves) {
            if (curve.state == RunState::Alive) curve.state = RunState::Finished;
        }
    }
    if (!decisions.empty()) {
        state.decisions_history.push_back({t, std::move(decisions)});
    }
}

namespace {

RaceReport assemble_report(const RaceState& state, const TraceMap& traces,
                           const RaceConfig& config) {
    RaceReport report;
    report.criterion = config.policy.criterion;
    report.delta = config.policy.delta;
    report.guards_enabled = config.policy.guards_enabled;
    report.master_seed = config.master_seed;
    report.horizon_T = config.horizon_T;
    report.epochs_budgeted =
        static_cast<long long>(state.initial_runs) * static_cast<long long>(config.horizon_T);

    long long executed = 0;
    for (const auto& [id, curve] : state.curves) {
        RunOutcome outcome;
        outcome.halted = curve.state == RunState::Halted;
        outcome.epochs_consumed = outcome.halted ? curve.halt_epoch : config.horizon_T;
        outcome.reason = outcome.halted ? curve.halt_reason : "finished";
        executed += outcome.epochs_consumed;
        report.per_run[id] = outcome;
    }
    report.epochs_executed = executed;
    report.savings =
        1.0 - static_cast<double>(executed) / static_cast<double>(report.epochs_budgeted);
    report.fail = detect_fail(report.per_run, traces);
    report.thresholds = state.thresholds_history;
    for (const EpochDecisions& ed : state.decisions_history) {
        std::vector<std::string> halted;
        for (const auto& [id, d] : ed.decisions) {
            if (d.halt) halted.push_back(id);
        }
        if (!halted.empty()) report.halts_by_epoch.emplace_back(ed.epoch, std::move(halted));
    }
    return report;
}

}  // namespace

RaceReport run_race(const TraceMap& traces, const RaceConfig& config, const FitProvider& fit) {
    config.validate();
    if (traces.empty()) throw DomainError("run_race: no traces");
    for (const auto& [id, values] : traces) {
        if (static_cast<int>(values.size()) != config.horizon_T) {
            throw DomainError("run_race: trace " + id + " does not cover the horizon");
        }
    }

    RaceState state;
    state.initial_runs = static_cast<int>(traces.size());
    for (const auto& [id, values] : traces) {
        LearningCurve curve;
        curve.run_id = id;
        curve.horizon_T = config.horizon_T;
        state.curves.emplace(id, std::move(curve));
    }

    for (int t = 1; t <= config.horizon_T; ++t) {
        std::map<std::string, double> obs;
        for (const auto& [id, curve] : state.curves) {
            if (curve.state == RunState::Alive) {
                obs[id] = traces.at(id)[static_cast<std::size_t>(t - 1)];
            }
        }
        if (obs.empty()) break;
        step(state, obs, config, fit);
    }
    return assemble_report(state, traces, config);
}

std::optional<FailRecord> detect_fail(const std::map<std::string, RunOutcome>& outcomes,
                                      const TraceMap& traces) {
    if (traces.empty()) throw DomainError("detect_fail: no traces");
    double best_final = std::numeric_limits<double>::infinity();
    for (const auto& [id, values] : traces) {
        if (values.empty()) throw DomainError("detect_fail: empty trace " + id);
        best_final = std::min(best_final, values.back());
    }
    // FAIL only when every tied-best run was halted
    std::string first_halted_best;
    int first_halted_epoch = 0;
    for (const auto& [id, values] : traces) {
        if (values.back() != best_final) continue;
        const RunOutcome& outcome = outcomes.at(id);
        if (!outcome.halted) return std::nullopt;
        if (first_halted_best.empty()) {
            first_halted_best = id;
            first_halted_epoch = outcome.epochs_consumed;
        }
    }

    FailRecord fail;
    fail.best_run_id = first_halted_best;
    fail.halt_epoch = first_halted_epoch;
    fail.best_final_error = best_final;
    double surviving = std::numeric_limits<double>::infinity();
    bool any_survivor = false;
    for (const auto& [id, outcome] : outcomes) {
        if (!outcome.halted) {
            surviving = std::min(surviving, traces.at(id).back());
            any_survivor = true;
        }
    }
    if (any_survivor) fail.surviving_best_final_error = surviving;
    return fail;
}

SyntheticRace gen_synthetic(const SynthConfig& config) {
    if (config.n_runs < 1) throw DomainError("gen_synthetic: n_runs must be >= 1");
    if (config.horizon_T < 2) throw DomainError("gen_synthetic: horizon_T must be >= 2");
    if (config.noise_sigma < 0.0) throw DomainError("gen_synthetic: noise_sigma must be >= 0");
    if (!(config.y_cap > 0.0)) throw DomainError("gen_synthetic: y_cap must be positive");

    ModelSpace space = ModelSpace::make(std::max(1.0, config.y_cap), config.horizon_T);
    std::vector<FamilyId> mix = config.family_mix;
    if (mix.empty()) {
        for (int i = 0; i < kFamilyCount; ++i) mix.push_back(static_cast<FamilyId>(i));
    }

    // With a spacing requirement, final values are placed on a pre-computed
    // grid of targets (shuffled across runs) and each curve's offset is solved
    // to land on its target exactly; free rejection sampling cannot pack n
    // finals at pairwise gaps into a bounded range in reasonable time.
    std::vector<double> targets;
    if (config.min_final_gap > 0.0) {
        if (config.n_runs > 1) {
            double lo = 0.04 * config.y_cap;
            // Leave headroom above the highest target so a curve can still
            // descend by min_total_drop without leaving [0, y_cap].
            double hi = std::min(0.85 * config.y_cap,
                                 config.y_cap - config.min_total_drop - 0.05 * config.y_cap);
            if (hi <= lo) {
                throw DomainError(
                    "gen_synthetic: min_total_drop leaves no target range; raise y_cap");
            }
            double step = std::max(config.min_final_gap * (1.0 + 1e-9),
                                   (hi - lo) / static_cast<double>(config.n_runs - 1));
            if (lo + static_cast<double>(config.n_runs - 1) * step > hi + 1e-12) {
                throw DomainError(
                    "gen_synthetic: gap * n_runs does not fit the value range; raise y_cap");
            }
            for (int r = 0; r < config.n_runs; ++r) {
                targets.push_back(lo + static_cast<double>(r) * step);
            }
        } else {
            targets.push_back(0.3 * config.y_cap);
        }
        Rng shuffle_rng(mix_seed({config.seed, 0x5A55ull}));
        for (std::size_t i = targets.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(shuffle_rng.next_u64() % i);
            std::swap(targets[i - 1], targets[j]);
        }
    }

    SyntheticRace out;
    out.horizon_T = config.horizon_T;
    const int width = config.n_runs > 100 ? 3 : 2;

    for (int r = 0; r < config.n_runs; ++r) {
        Rng rng(mix_seed({config.seed, 0x5EEDull, static_cast<std::uint64_t>(r)}));
        std::string id = "run-";
        {
            std::string num = std::to_string(r);
            id += std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0') + num;
        }

        constexpr int kMaxAttempts = 200000;
        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            FamilyId fid = mix[static_cast<std::size_t>(rng.next_u64() % mix.size())];
            const ModelFamily& fam = space.families[static_cast<std::size_t>(fid)];
            std::vector<double> params = init_params(fam, rng);
            double offset;
            if (!targets.empty()) {
                offset = targets[static_cast<std::size_t>(r)] +
                         eval_model(fam, params, static_cast<double>(config.horizon_T));
                if (offset < 0.0 || offset > space.y_cap) continue;
            } else {
                offset = rng.uniform(0.0, space.y_cap);
            }

            std::vector<double> clean(static_cast<std::size_t>(config.horizon_T));
            bool ok = true;
            for (int t = 1; t <= config.horizon_T && ok; ++t) {
                double g = eval_minimized(fam, params, offset, static_cast<double>(t));
                if (!std::isfinite(g) || g < 0.0 || g > config.y_cap) ok = false;
                clean[static_cast<std::size_t>(t - 1)] = g;
            }
            if (!ok) continue;
            if (config.require_improving && clean.back() > clean.front()) continue;
            if (clean.front() - clean.back() < config.min_total_drop) continue;
            if (config.min_early_frac > 0.0) {
                int t_early = std::max(2, (config.horizon_T + 9) / 10);
                double total = clean.front() - clean.back();
                double early = clean.front() - clean[static_cast<std::size_t>(t_early - 1)];
                if (early < config.min_early_frac * total) continue;
            }

            std::vector<double> noisy = clean;
            if (config.noise_sigma > 0.0) {
                for (double& v : noisy) {
                    v = std::max(0.0, v + config.noise_sigma * rng.normal());
                }
            }
            out.traces[id] = std::move(noisy);
            SynthTruth truth;
            truth.family = fid;
            truth.params = std::move(params);
            truth.offset = offset;
            truth.final_value = clean.back();
            out.truth[id] = std::move(truth);
            placed = true;
        }
        if (!placed) {
            throw DomainError("gen_synthetic: could not place run " + id +
                              " under the gap/shape constraints");
        }
    }

    double best = std::numeric_limits<double>::infinity();
    for (const auto& [id, truth] : out.truth) {
        if (truth.final_value < best) {
            best = truth.final_value;
            out.best_run_id = id;
        }
    }
    return out;
}

std::vector<SweepCell> sweep(const TraceMap& traces, const std::vector<Criterion>& criteria,
                             const std::vector<double>& deltas, const RaceConfig& base_config) {
    if (criteria.empty() || deltas.empty()) throw DomainError("sweep: empty grid");
    MemoFitProvider memo;
    FitProvider fit = memo.provider();
    std::vector<SweepCell> cells;
    for (Criterion c : criteria) {
        for (double d : deltas) {
            RaceConfig config = base_config;
            config.policy.criterion = c;
            config.policy.delta = d;
            SweepCell cell;
            cell.criterion = c;
            cell.delta = d;
            cell.report = run_race(traces, config, fit);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

}  // namespace runrace
