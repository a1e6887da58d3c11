#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "runrace/curve_models.hpp"
#include "runrace/errors.hpp"
#include "runrace/race.hpp"

using namespace runrace;

namespace {

// Scripted predictions: per run, per observed-epoch count, the literal sample
// values the "fit" should hand back. fitted_mean echoes the observations so
// the correlation guard always sees a perfect fit.
struct StubFits {
    std::map<std::string, std::map<int, std::vector<double>>> script;
    std::vector<double> fallback = {0.5, 0.5, 0.5, 0.5};

    FitProvider provider() const {
        return [this](const LearningCurve& curve, const InferenceConfig&, std::uint64_t) {
            CurveFit fit;
            fit.fitted_mean = curve.values;
            auto run = script.find(curve.run_id);
            if (run != script.end()) {
                auto at = run->second.find(curve.observed());
                if (at != run->second.end()) {
                    fit.values_at_horizon = at->second;
                    return fit;
                }
            }
            fit.values_at_horizon = fallback;
            return fit;
        };
    }
};

std::vector<double> ramp(double from, double to, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(from + (to - from) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return out;
}

RaceConfig three_run_config() {
    RaceConfig config;
    config.horizon_T = 10;
    config.policy.criterion = Criterion::E;
    config.policy.delta = 0.25;
    config.policy.warmup_epochs = 5;
    config.master_seed = 1;
    return config;
}

// A halts nobody's threshold (its own mass straddles tau), B sits at the edge,
// C continues through epoch 6 and collapses at 7.
StubFits scripted_three_runs() {
    StubFits stub;
    for (int m = 5; m <= 10; ++m) {
        stub.script["run-a"][m] = {0.28, 0.29, 0.30, 0.31};
        stub.script["run-b"][m] = {0.29, 0.32, 0.34, 0.36};
        stub.script["run-c"][m] = m < 7 ? std::vector<double>{0.29, 0.5, 0.5, 0.5}
                                        : std::vector<double>{0.5, 0.5, 0.5, 0.5};
    }
    return stub;
}

TraceMap three_run_traces() {
    return {{"run-a", ramp(0.8, 0.25, 10)},
            {"run-b", ramp(0.9, 0.33, 10)},
            {"run-c", ramp(1.0, 0.48, 10)}};
}

}  // namespace

TEST_CASE("fit_seed: deterministic, sensitive to run and epoch") {
    CHECK(fit_seed(7, "run-a", 3) == fit_seed(7, "run-a", 3));
    CHECK(fit_seed(7, "run-a", 3) != fit_seed(7, "run-a", 4));
    CHECK(fit_seed(7, "run-a", 3) != fit_seed(7, "run-b", 3));
    CHECK(fit_seed(7, "run-a", 3) != fit_seed(8, "run-a", 3));
}

TEST_CASE("scripted race: one halt at epoch 7, accounting and savings") {
    StubFits stub = scripted_three_runs();
    RaceReport report = run_race(three_run_traces(), three_run_config(), stub.provider());

    CHECK(report.epochs_budgeted == 30);
    CHECK(report.epochs_executed == 27);
    CHECK(report.savings == doctest::Approx(0.1));

    CHECK_FALSE(report.per_run.at("run-a").halted);
    CHECK(report.per_run.at("run-a").epochs_consumed == 10);
    CHECK(report.per_run.at("run-a").reason == "finished");
    CHECK(report.per_run.at("run-c").halted);
    CHECK(report.per_run.at("run-c").epochs_consumed == 7);
    CHECK(report.per_run.at("run-c").reason == "prob-below-delta");

    REQUIRE(report.halts_by_epoch.size() == 1);
    CHECK(report.halts_by_epoch[0].first == 7);
    CHECK(report.halts_by_epoch[0].second == std::vector<std::string>{"run-c"});

    // decisions run at epochs 5..9: threshold is A's conservative throughout
    REQUIRE(report.thresholds.size() == 5);
    for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
        CHECK(report.thresholds[i].epoch == 5 + static_cast<int>(i));
        CHECK(report.thresholds[i].spec.tau == doctest::Approx(0.30));
        CHECK_FALSE(report.thresholds[i].spec.fell_back_to_a);
    }

    // best final belongs to run-a, which survived
    CHECK_FALSE(report.fail.has_value());

    // identical inputs reproduce the identical report
    RaceReport again = run_race(three_run_traces(), three_run_config(), stub.provider());
    CHECK(report == again);
}

TEST_CASE("scripted race: halting the best final is a FAIL") {
    StubFits stub = scripted_three_runs();
    TraceMap traces = three_run_traces();
    traces["run-c"] = ramp(1.0, 0.2, 10);  // now run-c ends best but still halts

    RaceReport report = run_race(traces, three_run_config(), stub.provider());
    REQUIRE(report.fail.has_value());
    CHECK(report.fail->best_run_id == "run-c");
    CHECK(report.fail->halt_epoch == 7);
    CHECK(report.fail->best_final_error == doctest::Approx(0.2));
    REQUIRE(report.fail->surviving_best_final_error.has_value());
    CHECK(*report.fail->surviving_best_final_error == doctest::Approx(0.25));
}

TEST_CASE("detect_fail: tie semantics") {
    TraceMap traces = {{"r1", {0.5, 0.2}}, {"r2", {0.6, 0.2}}, {"r3", {0.7, 0.4}}};
    std::map<std::string, RunOutcome> outcomes;
    outcomes["r1"] = {true, 1, "prob-below-delta"};
    outcomes["r2"] = {false, 2, "finished"};
    outcomes["r3"] = {false, 2, "finished"};

    // one tied-best run survived: no FAIL
    CHECK_FALSE(detect_fail(outcomes, traces).has_value());

    // every tied-best run halted: FAIL, attributed to the first by id
    outcomes["r2"] = {true, 1, "prob-below-delta"};
    auto fail = detect_fail(outcomes, traces);
    REQUIRE(fail.has_value());
    CHECK(fail->best_run_id == "r1");
    CHECK(fail->best_final_error == doctest::Approx(0.2));
    REQUIRE(fail->surviving_best_final_error.has_value());
    CHECK(*fail->surviving_best_final_error == doctest::Approx(0.4));

    // no survivors at all: the surviving-best field stays empty
    outcomes["r3"] = {true, 1, "prob-below-delta"};
    auto wipe = detect_fail(outcomes, traces);
    REQUIRE(wipe.has_value());
    CHECK_FALSE(wipe->surviving_best_final_error.has_value());
}

TEST_CASE("delta 0 never halts and logs no thresholds") {
    StubFits stub = scripted_three_runs();
    RaceConfig config = three_run_config();
    config.policy.delta = 0.0;

    for (Criterion c : {Criterion::A, Criterion::E, Criterion::F, Criterion::SuccessiveHalving}) {
        config.policy.criterion = c;
        RaceReport report = run_race(three_run_traces(), config, stub.provider());
        CHECK(report.epochs_executed == 30);
        CHECK(report.savings == 0.0);
        CHECK(report.halts_by_epoch.empty());
        CHECK(report.thresholds.empty());
        CHECK_FALSE(report.fail.has_value());
        for (const auto& [id, outcome] : report.per_run) CHECK_FALSE(outcome.halted);
    }
}

TEST_CASE("non-finite observation halts with data-error") {
    StubFits stub = scripted_three_runs();
    TraceMap traces = three_run_traces();
    traces["run-c"][5] = std::numeric_limits<double>::quiet_NaN();  // epoch 6

    RaceReport report = run_race(traces, three_run_config(), stub.provider());
    CHECK(report.per_run.at("run-c").halted);
    CHECK(report.per_run.at("run-c").reason == "data-error");
    CHECK(report.per_run.at("run-c").epochs_consumed == 6);
    CHECK(report.epochs_executed == 26);
}

TEST_CASE("step: halted runs never resume, protocol errors on misuse") {
    StubFits stub = scripted_three_runs();
    RaceConfig config = three_run_config();
    TraceMap traces = three_run_traces();

    RaceState state;
    state.initial_runs = 3;
    for (const auto& [id, values] : traces) {
        LearningCurve curve;
        curve.run_id = id;
        curve.horizon_T = config.horizon_T;
        state.curves.emplace(id, std::move(curve));
    }
    FitProvider fit = stub.provider();

    auto observe = [&](int t, bool include_c) {
        std::map<std::string, double> obs;
        for (const auto& [id, values] : traces) {
            if (!include_c && id == "run-c") continue;
            obs[id] = values[static_cast<std::size_t>(t - 1)];
        }
        step(state, obs, config, fit);
    };

    for (int t = 1; t <= 7; ++t) observe(t, true);
    CHECK(state.curves.at("run-c").state == RunState::Halted);
    CHECK(state.curves.at("run-c").halt_epoch == 7);
    CHECK(state.alive_ids() == std::vector<std::string>{"run-a", "run-b"});

    // an observation for the halted run is a protocol error; the halted curve
    // keeps exactly its pre-halt observations
    std::map<std::string, double> bad = {{"run-a", 0.3}, {"run-b", 0.35}, {"run-c", 0.4}};
    CHECK_THROWS_AS(step(state, bad, config, fit), ProtocolError);
    CHECK(state.curves.at("run-c").observed() == 7);

    std::map<std::string, double> unknown = {{"run-a", 0.3}, {"run-b", 0.35}, {"run-x", 0.1}};
    CHECK_THROWS_AS(step(state, unknown, config, fit), NotFoundError);

    for (int t = 8; t <= 10; ++t) observe(t, false);
    CHECK(state.curves.at("run-a").state == RunState::Finished);
    CHECK(state.curves.at("run-c").observed() == 7);
    CHECK_THROWS_AS(observe(10, false), ProtocolError);  // budget epoch already reached

    // missing an alive run is a protocol error too (fresh state: the throw may
    // land after earlier runs in the map already absorbed their observation)
    RaceState fresh;
    fresh.initial_runs = 2;
    for (const char* id : {"p", "q"}) {
        LearningCurve curve;
        curve.run_id = id;
        curve.horizon_T = 4;
        fresh.curves.emplace(id, std::move(curve));
    }
    RaceConfig small = config;
    small.horizon_T = 4;
    std::map<std::string, double> partial = {{"p", 0.3}};
    CHECK_THROWS_AS(step(fresh, partial, small, fit), ProtocolError);
}

TEST_CASE("successive halving race halves the field on schedule") {
    StubFits stub;  // prediction-free criterion, stub only satisfies the type
    RaceConfig config;
    config.horizon_T = 8;
    config.policy.criterion = Criterion::SuccessiveHalving;
    config.policy.delta = 0.5;  // any positive value enables the baseline
    config.master_seed = 1;

    TraceMap traces = {{"r1", ramp(0.4, 0.1, 8)},
                       {"r2", ramp(0.5, 0.2, 8)},
                       {"r3", ramp(0.6, 0.3, 8)},
                       {"r4", ramp(0.7, 0.4, 8)}};
    RaceReport report = run_race(traces, config, stub.provider());

    // halving epochs for T=8 are {1, 2, 4}; a lone survivor is never pruned,
    // so epoch 4 halts nobody and leaves no entry
    REQUIRE(report.halts_by_epoch.size() == 2);
    CHECK(report.halts_by_epoch[0].first == 1);
    CHECK(report.halts_by_epoch[0].second == std::vector<std::string>{"r3", "r4"});
    CHECK(report.halts_by_epoch[1].first == 2);
    CHECK(report.halts_by_epoch[1].second == std::vector<std::string>{"r2"});
    CHECK_FALSE(report.per_run.at("r1").halted);
    CHECK(report.per_run.at("r2").reason == "successive-halving-prune");
}

TEST_CASE("run_race input validation") {
    StubFits stub;
    RaceConfig config = three_run_config();
    CHECK_THROWS_AS(run_race({}, config, stub.provider()), DomainError);
    TraceMap shortTrace = {{"r1", {0.5, 0.4}}};
    CHECK_THROWS_AS(run_race(shortTrace, config, stub.provider()), DomainError);
    RaceConfig bad = config;
    bad.horizon_T = 0;
    CHECK_THROWS_AS(run_race(three_run_traces(), bad, stub.provider()), DomainError);
}

TEST_CASE("gen_synthetic: determinism, shape, truth consistency") {
    SynthConfig config;
    config.n_runs = 6;
    config.horizon_T = 30;
    config.noise_sigma = 0.02;
    config.y_cap = 1.5;
    config.min_final_gap = 0.05;
    config.min_total_drop = 0.3;
    config.min_early_frac = 0.5;
    config.seed = 21;

    SyntheticRace race = gen_synthetic(config);
    CHECK(race.horizon_T == 30);
    REQUIRE(race.traces.size() == 6);
    REQUIRE(race.truth.size() == 6);

    SyntheticRace again = gen_synthetic(config);
    CHECK(race.traces == again.traces);
    CHECK(race.truth == again.truth);
    CHECK(race.best_run_id == again.best_run_id);

    ModelSpace space = ModelSpace::make(std::max(1.0, config.y_cap), config.horizon_T);
    double best_final = 1e300;
    std::string best_id;
    std::vector<double> finals;
    for (const auto& [id, truth] : race.truth) {
        const ModelFamily& fam = space.families[static_cast<std::size_t>(truth.family)];
        double g1 = eval_minimized(fam, truth.params, truth.offset, 1.0);
        double gT = eval_minimized(fam, truth.params, truth.offset,
                                   static_cast<double>(config.horizon_T));
        int t_early = std::max(2, (config.horizon_T + 9) / 10);
        double ge = eval_minimized(fam, truth.params, truth.offset,
                                   static_cast<double>(t_early));
        CHECK(gT == doctest::Approx(truth.final_value).epsilon(1e-9));
        CHECK(g1 - gT >= config.min_total_drop - 1e-9);
        CHECK(g1 - ge >= config.min_early_frac * (g1 - gT) - 1e-9);
        finals.push_back(truth.final_value);
        if (truth.final_value < best_final) {
            best_final = truth.final_value;
            best_id = id;
        }
        // traces stay non-negative (noise is clamped at zero)
        for (double v : race.traces.at(id)) CHECK(v >= 0.0);
        CHECK(race.traces.at(id).size() == 30);
    }
    CHECK(race.best_run_id == best_id);
    for (std::size_t i = 0; i < finals.size(); ++i) {
        for (std::size_t j = i + 1; j < finals.size(); ++j) {
            CHECK(std::abs(finals[i] - finals[j]) >= config.min_final_gap - 1e-9);
        }
    }
}

TEST_CASE("gen_synthetic: zero noise reproduces the clean curves exactly") {
    SynthConfig config;
    config.n_runs = 4;
    config.horizon_T = 20;
    config.noise_sigma = 0.0;
    config.y_cap = 1.0;
    config.min_final_gap = 0.08;
    config.seed = 5;

    SyntheticRace race = gen_synthetic(config);
    ModelSpace space = ModelSpace::make(1.0, 20);
    for (const auto& [id, truth] : race.truth) {
        const ModelFamily& fam = space.families[static_cast<std::size_t>(truth.family)];
        const std::vector<double>& trace = race.traces.at(id);
        for (int t = 1; t <= 20; ++t) {
            double clean = eval_minimized(fam, truth.params, truth.offset,
                                          static_cast<double>(t));
            CHECK(trace[static_cast<std::size_t>(t - 1)] ==
                  doctest::Approx(clean).epsilon(1e-12));
        }
    }
}

TEST_CASE("gen_synthetic: impossible target ranges are domain errors") {
    SynthConfig config;
    config.n_runs = 10;
    config.horizon_T = 20;
    config.y_cap = 1.0;
    config.min_final_gap = 0.05;
    config.min_total_drop = 0.95;  // leaves hi below lo
    CHECK_THROWS_AS(gen_synthetic(config), DomainError);

    SynthConfig cramped;
    cramped.n_runs = 30;
    cramped.horizon_T = 20;
    cramped.y_cap = 1.0;
    cramped.min_final_gap = 0.2;  // 30 finals cannot sit 0.2 apart inside [0, 1]
    CHECK_THROWS_AS(gen_synthetic(cramped), DomainError);
}

TEST_CASE("sweep cells equal standalone races cell by cell") {
    SynthConfig synth;
    synth.n_runs = 4;
    synth.horizon_T = 12;
    synth.noise_sigma = 0.02;
    synth.y_cap = 1.0;
    synth.min_final_gap = 0.1;
    synth.min_total_drop = 0.2;
    synth.seed = 33;
    SyntheticRace race = gen_synthetic(synth);

    RaceConfig base;
    base.horizon_T = 12;
    base.policy.warmup_epochs = 6;
    base.policy.delta = 0.3;
    base.inference.chain_length = 600;
    base.inference.burn_in = 200;
    base.inference.thinning = 10;
    base.master_seed = 17;

    std::vector<Criterion> criteria = {Criterion::A, Criterion::E};
    std::vector<double> deltas = {0.1, 0.3};
    std::vector<SweepCell> cells = sweep(race.traces, criteria, deltas, base);
    REQUIRE(cells.size() == 4);

    std::size_t idx = 0;
    for (Criterion c : criteria) {
        for (double d : deltas) {
            CHECK(cells[idx].criterion == c);
            CHECK(cells[idx].delta == d);
            RaceConfig config = base;
            config.policy.criterion = c;
            config.policy.delta = d;
            RaceReport standalone = run_race(race.traces, config);
            CHECK(cells[idx].report == standalone);
            ++idx;
        }
    }
}
