// runrace: race complete training traces against a halting policy, sweep
// policy grids, generate synthetic corpora, and serve live halting decisions
// over line-delimited JSON on stdio.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "runrace/errors.hpp"
#include "runrace/io.hpp"
#include "runrace/race.hpp"

namespace {

using nlohmann::json;
using namespace runrace;

struct PolicyFlags {
    std::string criterion = "f";
    double delta = 0.5;
    bool guards = false;
    int warmup = 5;
    int k_override = 0;  // 0 = unset
};

struct InferenceFlags {
    int chain = 3000;
    int burn = 1000;
    int thin = 20;
    double scale = 0.15;
};

void add_policy_flags(CLI::App* cmd, PolicyFlags& p) {
    cmd->add_option("--criterion", p.criterion,
                    "halting criterion: a, b, c, d, e, f, or sh (successive halving)");
    cmd->add_option("--delta", p.delta, "risk level in [0, 1]; 0 disables halting");
    cmd->add_flag("--guards", p.guards, "enable decision guards");
    cmd->add_option("--min-epochs", p.warmup, "observations required before predictions");
    cmd->add_option("--k-override", p.k_override, "fixed k for criterion f (0 = auto)");
}

void add_inference_flags(CLI::App* cmd, InferenceFlags& f) {
    cmd->add_option("--chain", f.chain, "sampler chain length");
    cmd->add_option("--burn", f.burn, "burn-in iterations");
    cmd->add_option("--thin", f.thin, "thinning stride");
    cmd->add_option("--scale", f.scale, "base proposal scale");
}

HaltPolicy make_policy(const PolicyFlags& p) {
    HaltPolicy policy;
    policy.criterion = criterion_from_name(p.criterion);
    policy.delta = p.delta;
    policy.guards_enabled = p.guards;
    policy.warmup_epochs = p.warmup;
    if (p.k_override > 0) policy.k_override = p.k_override;
    policy.validate();
    return policy;
}

InferenceConfig make_inference(const InferenceFlags& f) {
    InferenceConfig cfg;
    cfg.chain_length = f.chain;
    cfg.burn_in = f.burn;
    cfg.thinning = f.thin;
    cfg.proposal_scales = {f.scale};
    cfg.validate();
    return cfg;
}

std::string corpus_label(const std::string& path) {
    std::size_t slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    std::size_t dot = base.find_last_of('.');
    return dot == std::string::npos || dot == 0 ? base : base.substr(0, dot);
}

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_text_file(out_path, text);
    }
}

std::vector<Criterion> parse_criteria_list(const std::string& csv) {
    std::vector<Criterion> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(criterion_from_name(item));
    }
    if (out.empty()) throw DomainError("empty criteria list");
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw DomainError("bad number `" + item + "`");
    }
    if (out.empty()) throw DomainError("empty list");
    return out;
}

int run_simulate(const std::string& trace_path, const std::optional<std::string>& manifest_path,
                 const PolicyFlags& pf, const InferenceFlags& inf, std::uint64_t seed,
                 const std::string& format, const std::string& out_path) {
    Corpus corpus = load_corpus(trace_path, manifest_path);
    RaceConfig config;
    config.horizon_T = corpus.manifest.horizon_T;
    config.policy = make_policy(pf);
    config.inference = make_inference(inf);
    config.master_seed = seed;

    ReportDocument doc;
    doc.corpus_label = corpus_label(trace_path);
    doc.config = config;
    SweepCell cell;
    cell.criterion = config.policy.criterion;
    cell.delta = config.policy.delta;
    cell.report = run_race(corpus.traces, config);
    doc.cells.push_back(std::move(cell));

    write_output(emit_report(doc, format == "machine" ? ReportFormat::Machine : ReportFormat::Table),
                 out_path);
    return 0;
}

int run_sweep(const std::string& trace_path, const std::optional<std::string>& manifest_path,
              const std::string& criteria_csv, const std::string& deltas_csv,
              const PolicyFlags& pf, const InferenceFlags& inf, std::uint64_t seed,
              const std::string& format, const std::string& out_path) {
    Corpus corpus = load_corpus(trace_path, manifest_path);
    RaceConfig config;
    config.horizon_T = corpus.manifest.horizon_T;
    config.policy = make_policy(pf);
    config.inference = make_inference(inf);
    config.master_seed = seed;

    ReportDocument doc;
    doc.corpus_label = corpus_label(trace_path);
    doc.config = config;
    doc.cells = sweep(corpus.traces, parse_criteria_list(criteria_csv),
                      parse_double_list(deltas_csv), config);

    write_output(emit_report(doc, format == "machine" ? ReportFormat::Machine : ReportFormat::Table),
                 out_path);
    return 0;
}

int run_ktable(int n_max, const std::string& deltas_csv, const std::string& format,
               const std::string& out_path) {
    std::vector<double> deltas = parse_double_list(deltas_csv);
    if (n_max < 1) throw DomainError("--n must be >= 1");
    std::string text;
    if (format == "machine") {
        json rows = json::array();
        for (int n = 1; n <= n_max; ++n) {
            json ks = json::array();
            for (double d : deltas) ks.push_back(select_k(n, d));
            rows.push_back(json{{"n", n}, {"k", ks}});
        }
        text = json{{"kind", "k-table"}, {"deltas", deltas}, {"rows", rows}}.dump(2) + "\n";
    } else {
        std::ostringstream out;
        out << "n";
        for (double d : deltas) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%g", d);
            out << "\tdelta=" << buf;
        }
        out << "\n";
        for (int n = 1; n <= n_max; ++n) {
            out << n;
            for (double d : deltas) out << "\t" << select_k(n, d);
            out << "\n";
        }
        text = out.str();
    }
    write_output(text, out_path);
    return 0;
}

int run_synth(int runs, int horizon, double noise, double y_cap, double min_gap,
              double min_drop, double min_early_frac, bool allow_nonimproving,
              const std::string& families_csv, std::uint64_t seed, const std::string& out_path) {
    SynthConfig cfg;
    cfg.n_runs = runs;
    cfg.horizon_T = horizon;
    cfg.noise_sigma = noise;
    cfg.y_cap = y_cap;
    cfg.min_final_gap = min_gap;
    cfg.min_total_drop = min_drop;
    cfg.min_early_frac = min_early_frac;
    cfg.require_improving = !allow_nonimproving;
    cfg.seed = seed;
    if (!families_csv.empty()) {
        std::stringstream ss(families_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) cfg.family_mix.push_back(family_from_name(item));
        }
    }
    SyntheticRace race = gen_synthetic(cfg);

    Manifest manifest;
    manifest.horizon_T = race.horizon_T;
    for (const auto& [id, values] : race.traces) manifest.runs.push_back(id);
    manifest.truth = race.truth;
    write_corpus(out_path, race.traces, manifest);
    std::cout << "wrote " << race.traces.size() << " runs x " << race.horizon_T << " epochs to "
              << out_path << " (+ " << manifest_path_for(out_path) << ")\n"
              << "best run: " << race.best_run_id << "\n";
    return 0;
}

int run_serve(int horizon, const PolicyFlags& pf, const InferenceFlags& inf, std::uint64_t seed) {
    RaceConfig config;
    config.horizon_T = horizon;
    config.policy = make_policy(pf);
    config.inference = make_inference(inf);
    config.master_seed = seed;
    Advisor advisor(config);

    std::string line;
    while (std::getline(std::cin, line)) {
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        json response;
        try {
            response = advisor.handle_request(json::parse(line));
        } catch (const json::exception& e) {
            response = json{{"ok", false},
                            {"error", {{"class", "format-error"},
                                       {"message", std::string("bad JSON: ") + e.what()}}}};
        }
        std::cout << response.dump() << "\n" << std::flush;
    }
    return 0;
}

int run_fit(const std::string& trace_path, const std::string& run_id, int epochs, int at,
            double delta, const InferenceFlags& inf, std::uint64_t seed,
            const std::string& out_path) {
    TraceMap traces = parse_trace_csv(read_text_file(trace_path));
    std::string id = run_id;
    if (id.empty()) {
        if (traces.size() != 1)
            throw DomainError("trace has " + std::to_string(traces.size()) +
                              " runs; pick one with --run");
        id = traces.begin()->first;
    }
    auto it = traces.find(id);
    if (it == traces.end()) throw NotFoundError("unknown run " + id);

    LearningCurve curve;
    curve.run_id = id;
    curve.values = it->second;
    if (epochs > 0) {
        if (epochs > static_cast<int>(curve.values.size()))
            throw DomainError("--epochs exceeds trace length");
        curve.values.resize(epochs);
    }
    curve.horizon_T = at > 0 ? at : static_cast<int>(it->second.size());
    if (curve.horizon_T < static_cast<int>(curve.values.size()))
        throw DomainError("--at must not precede the last observed epoch");

    InferenceConfig cfg = make_inference(inf);
    cfg.quantile_delta = delta;
    cfg.seed = seed;
    cfg.validate();

    CurveFit fit = fit_curve(curve, cfg);
    Prediction pred = prediction_from_fit(fit, curve, delta);
    json out{{"run", id},
             {"observed", curve.observed()},
             {"at", curve.horizon_T},
             {"point", pred.point_estimate},
             {"conservative", pred.conservative_estimate},
             {"quantile_delta", delta},
             {"valid", pred.valid},
             {"reason", validity_reason_name(pred.reason)},
             {"samples", pred.samples.size()}};
    write_output(out.dump(2) + "\n", out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"one-shot run racing with learning-curve extrapolation"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "race one corpus under one policy");
    std::string sim_trace, sim_manifest, sim_format = "table", sim_out;
    PolicyFlags sim_policy;
    InferenceFlags sim_inf;
    std::uint64_t sim_seed = 0;
    sim->add_option("--trace", sim_trace, "trace csv")->required();
    sim->add_option("--manifest", sim_manifest, "manifest sidecar (default: <trace>.manifest.json)");
    add_policy_flags(sim, sim_policy);
    add_inference_flags(sim, sim_inf);
    sim->add_option("--seed", sim_seed, "master seed");
    sim->add_option("--format", sim_format, "table or machine")
        ->check(CLI::IsMember({"table", "machine"}));
    sim->add_option("--out", sim_out, "write here instead of stdout");

    // sweep
    auto* swp = app.add_subcommand("sweep", "race a criteria x delta grid");
    std::string swp_trace, swp_manifest, swp_format = "table", swp_out;
    std::string swp_criteria = "a,b,c,d,e,f,sh", swp_deltas = "0.1,0.3,0.5";
    PolicyFlags swp_policy;
    InferenceFlags swp_inf;
    std::uint64_t swp_seed = 0;
    swp->add_option("--trace", swp_trace, "trace csv")->required();
    swp->add_option("--manifest", swp_manifest, "manifest sidecar");
    swp->add_option("--criteria", swp_criteria, "comma list of criteria");
    swp->add_option("--deltas", swp_deltas, "comma list of risk levels");
    add_policy_flags(swp, swp_policy);
    add_inference_flags(swp, swp_inf);
    swp->add_option("--seed", swp_seed, "master seed");
    swp->add_option("--format", swp_format, "table or machine")
        ->check(CLI::IsMember({"table", "machine"}));
    swp->add_option("--out", swp_out, "write here instead of stdout");

    // ktable
    auto* ktb = app.add_subcommand("ktable", "print the criterion-f k selection table");
    int ktb_n = 50;
    std::string ktb_deltas = "0.01,0.05,0.1,0.3,0.5", ktb_format = "table", ktb_out;
    ktb->add_option("--n", ktb_n, "largest run count");
    ktb->add_option("--deltas", ktb_deltas, "comma list of risk levels");
    ktb->add_option("--format", ktb_format, "table or machine")
        ->check(CLI::IsMember({"table", "machine"}));
    ktb->add_option("--out", ktb_out, "write here instead of stdout");

    // synth
    auto* syn = app.add_subcommand("synth", "generate a synthetic corpus");
    int syn_runs = 20, syn_horizon = 50;
    double syn_noise = 0.02, syn_ycap = 1.0, syn_gap = 0.0, syn_drop = 0.0, syn_early = 0.0;
    bool syn_nonimp = false;
    std::string syn_families, syn_out;
    std::uint64_t syn_seed = 0;
    syn->add_option("--runs", syn_runs, "number of runs");
    syn->add_option("--horizon", syn_horizon, "budget epochs per run");
    syn->add_option("--noise", syn_noise, "observation noise sigma");
    syn->add_option("--y-cap", syn_ycap, "clean curves stay within [0, y-cap]");
    syn->add_option("--min-gap", syn_gap, "pairwise spacing of final clean values");
    syn->add_option("--min-drop", syn_drop, "required clean descent from epoch 1 to the horizon");
    syn->add_option("--min-early-frac", syn_early,
                    "fraction of the descent that must land by epoch ceil(T/10)");
    syn->add_flag("--allow-nonimproving", syn_nonimp, "keep curves that end above their start");
    syn->add_option("--families", syn_families, "comma list of curve families (default: all)");
    syn->add_option("--seed", syn_seed, "generator seed");
    syn->add_option("--out", syn_out, "trace csv path")->required();

    // serve
    auto* srv = app.add_subcommand("serve", "advisory service over JSON lines on stdio");
    int srv_horizon = 0;
    PolicyFlags srv_policy;
    InferenceFlags srv_inf;
    std::uint64_t srv_seed = 0;
    srv->add_option("--horizon", srv_horizon, "budget epochs per run")->required();
    add_policy_flags(srv, srv_policy);
    add_inference_flags(srv, srv_inf);
    srv->add_option("--seed", srv_seed, "master seed");

    // fit
    auto* fit = app.add_subcommand("fit", "fit one curve and print its prediction");
    std::string fit_trace, fit_run, fit_out;
    int fit_epochs = 0, fit_at = 0;
    double fit_delta = 0.05;
    InferenceFlags fit_inf;
    std::uint64_t fit_seed = 0;
    fit->add_option("--trace", fit_trace, "trace csv")->required();
    fit->add_option("--run", fit_run, "run id (optional when the trace has one run)");
    fit->add_option("--epochs", fit_epochs, "use only the first N observations");
    fit->add_option("--at", fit_at, "prediction epoch (default: trace length)");
    fit->add_option("--delta", fit_delta, "conservative quantile level");
    add_inference_flags(fit, fit_inf);
    fit->add_option("--seed", fit_seed, "sampler seed");
    fit->add_option("--out", fit_out, "write here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << nlohmann::json{
                         {"error", {{"class", "usage-error"}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 64;
    }

    try {
        if (sim->parsed())
            return run_simulate(sim_trace,
                                sim_manifest.empty() ? std::nullopt
                                                     : std::optional<std::string>(sim_manifest),
                                sim_policy, sim_inf, sim_seed, sim_format, sim_out);
        if (swp->parsed())
            return run_sweep(swp_trace,
                             swp_manifest.empty() ? std::nullopt
                                                  : std::optional<std::string>(swp_manifest),
                             swp_criteria, swp_deltas, swp_policy, swp_inf, swp_seed, swp_format,
                             swp_out);
        if (ktb->parsed()) return run_ktable(ktb_n, ktb_deltas, ktb_format, ktb_out);
        if (syn->parsed())
            return run_synth(syn_runs, syn_horizon, syn_noise, syn_ycap, syn_gap, syn_drop,
                             syn_early, syn_nonimp, syn_families, syn_seed, syn_out);
        if (srv->parsed()) return run_serve(srv_horizon, srv_policy, srv_inf, srv_seed);
        if (fit->parsed())
            return run_fit(fit_trace, fit_run, fit_epochs, fit_at, fit_delta, fit_inf, fit_seed,
                           fit_out);
        throw DomainError("no subcommand");
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", {{"class", runrace::error_class_name(e)},
                                               {"message", e.what()}}}}.dump()
                  << "\n";
        return runrace::exit_code_for(e);
    }
}
