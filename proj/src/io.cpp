#include "runrace/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "runrace/errors.hpp"

namespace runrace {

namespace {

using nlohmann::json;

constexpr const char* kTraceHeader = "run_id,epoch,validation_error";

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path);
    return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path);
}

TraceMap parse_trace_csv(const std::string& text) {
    TraceMap traces;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    std::map<std::string, int> last_epoch;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != kTraceHeader)
                throw FormatError(std::string("expected header `") + kTraceHeader + "`", line_no);
            saw_header = true;
            continue;
        }
        auto fields = split_fields(line);
        if (fields.size() != 3)
            throw FormatError("expected 3 fields, got " + std::to_string(fields.size()), line_no);
        const std::string& id = fields[0];
        if (id.empty()) throw FormatError("empty run_id", line_no);

        int epoch = 0;
        auto [ep, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), epoch);
        if (ec != std::errc() || ep != fields[1].data() + fields[1].size() || epoch < 1)
            throw FormatError("bad epoch `" + fields[1] + "`", line_no);

        const char* vstart = fields[2].c_str();
        char* vend = nullptr;
        double value = std::strtod(vstart, &vend);
        if (vend != vstart + fields[2].size() || fields[2].empty())
            throw FormatError("bad validation_error `" + fields[2] + "`", line_no);
        if (std::isinf(value)) throw FormatError("infinite validation_error", line_no);
        if (value < 0) throw FormatError("negative validation_error", line_no);

        int expected = last_epoch.count(id) ? last_epoch[id] + 1 : 1;
        if (epoch == expected) {
            traces[id].push_back(value);
            last_epoch[id] = epoch;
        } else if (epoch <= last_epoch[id]) {
            throw FormatError("duplicate or out-of-order epoch " + std::to_string(epoch) +
                                  " for run " + id,
                              line_no);
        } else {
            throw FormatError("epoch gap for run " + id + ": expected " +
                                  std::to_string(expected) + ", got " + std::to_string(epoch),
                              line_no);
        }
    }
    if (!saw_header) throw FormatError("missing header", 1);
    if (traces.empty()) throw FormatError("no data rows", line_no);
    return traces;
}

std::string emit_trace_csv(const TraceMap& traces) {
    std::string out = kTraceHeader;
    out += '\n';
    for (const auto& [id, values] : traces) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            out += id;
            out += ',';
            out += std::to_string(i + 1);
            out += ',';
            out += format_double(values[i]);
            out += '\n';
        }
    }
    return out;
}

namespace {

json truth_to_json(const SynthTruth& t) {
    return json{{"family", family_name(t.family)},
                {"params", t.params},
                {"offset", t.offset},
                {"final_value", t.final_value}};
}

SynthTruth truth_from_json(const json& j) {
    SynthTruth t;
    t.family = family_from_name(j.at("family").get<std::string>());
    t.params = j.at("params").get<std::vector<double>>();
    t.offset = j.at("offset").get<double>();
    t.final_value = j.at("final_value").get<double>();
    return t;
}

}  // namespace

Manifest parse_manifest(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
    }
    try {
        Manifest m;
        m.horizon_T = j.at("horizon_T").get<int>();
        if (m.horizon_T < 1) throw FormatError("horizon_T must be >= 1");
        m.runs = j.at("runs").get<std::vector<std::string>>();
        if (j.contains("truth")) {
            for (const auto& [id, tj] : j.at("truth").items()) m.truth[id] = truth_from_json(tj);
        }
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad manifest: ") + e.what());
    }
}

std::string emit_manifest(const Manifest& manifest) {
    json j{{"horizon_T", manifest.horizon_T}, {"runs", manifest.runs}};
    if (!manifest.truth.empty()) {
        json t = json::object();
        for (const auto& [id, truth] : manifest.truth) t[id] = truth_to_json(truth);
        j["truth"] = t;
    }
    return j.dump(2) + "\n";
}

std::string manifest_path_for(const std::string& trace_path) {
    std::string base = trace_path;
    std::size_t dot = base.find_last_of('.');
    std::size_t slash = base.find_last_of("/\\");
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash))
        base = base.substr(0, dot);
    return base + ".manifest.json";
}

Corpus load_corpus(const std::string& trace_path, const std::optional<std::string>& manifest_path) {
    Corpus corpus;
    corpus.traces = parse_trace_csv(read_text_file(trace_path));

    std::string mpath = manifest_path.value_or(manifest_path_for(trace_path));
    bool have_manifest = manifest_path.has_value();
    if (!have_manifest) {
        std::ifstream probe(mpath);
        have_manifest = probe.good();
    }
    if (have_manifest) {
        corpus.manifest = parse_manifest(read_text_file(mpath));
    } else {
        std::size_t len = corpus.traces.begin()->second.size();
        for (const auto& [id, values] : corpus.traces) {
            if (values.size() != len)
                throw FormatError("no manifest and trace lengths differ (run " + id + ")");
        }
        corpus.manifest.horizon_T = static_cast<int>(len);
        for (const auto& [id, values] : corpus.traces) corpus.manifest.runs.push_back(id);
    }

    if (corpus.manifest.runs.size() != corpus.traces.size())
        throw FormatError("manifest lists " + std::to_string(corpus.manifest.runs.size()) +
                          " runs, trace has " + std::to_string(corpus.traces.size()));
    for (const auto& id : corpus.manifest.runs) {
        auto it = corpus.traces.find(id);
        if (it == corpus.traces.end()) throw FormatError("manifest run " + id + " missing from trace");
        if (static_cast<int>(it->second.size()) != corpus.manifest.horizon_T)
            throw FormatError("run " + id + " has " + std::to_string(it->second.size()) +
                              " epochs, horizon_T is " + std::to_string(corpus.manifest.horizon_T));
    }
    return corpus;
}

void write_corpus(const std::string& trace_path, const TraceMap& traces, const Manifest& manifest) {
    write_text_file(trace_path, emit_trace_csv(traces));
    write_text_file(manifest_path_for(trace_path), emit_manifest(manifest));
}

std::string format_savings(double fraction) {
    if (fraction <= 0) return "0.0%";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", fraction * 100.0);
    return std::string("−") + buf + "%";
}

std::string format_fail(const FailRecord& fail) {
    char best[32];
    std::snprintf(best, sizeof(best), "%.4g", fail.best_final_error);
    std::string out = std::string("FAIL by ") + best + " → ";
    if (fail.surviving_best_final_error) {
        char surv[32];
        std::snprintf(surv, sizeof(surv), "%.4g", *fail.surviving_best_final_error);
        out += surv;
    } else {
        out += "none";
    }
    return out;
}

namespace {

json threshold_to_json(const EpochThreshold& t) {
    json j{{"epoch", t.epoch},
           {"criterion", criterion_name(t.spec.criterion)},
           {"tau", t.spec.tau},
           {"fallback_a", t.spec.fell_back_to_a}};
    j["k"] = t.spec.k_used ? json(*t.spec.k_used) : json(nullptr);
    j["source_run"] = t.spec.source_run ? json(*t.spec.source_run) : json(nullptr);
    return j;
}

EpochThreshold threshold_from_json(const json& j) {
    EpochThreshold t;
    t.epoch = j.at("epoch").get<int>();
    t.spec.criterion = criterion_from_name(j.at("criterion").get<std::string>());
    t.spec.tau = j.at("tau").get<double>();
    t.spec.fell_back_to_a = j.at("fallback_a").get<bool>();
    if (!j.at("k").is_null()) t.spec.k_used = j.at("k").get<int>();
    if (!j.at("source_run").is_null()) t.spec.source_run = j.at("source_run").get<std::string>();
    return t;
}

json policy_to_json(const HaltPolicy& p) {
    json j{{"criterion", criterion_name(p.criterion)},
           {"delta", p.delta},
           {"guards", p.guards_enabled},
           {"warmup_epochs", p.warmup_epochs}};
    j["k_override"] = p.k_override ? json(*p.k_override) : json(nullptr);
    return j;
}

HaltPolicy policy_from_json(const json& j) {
    HaltPolicy p;
    p.criterion = criterion_from_name(j.at("criterion").get<std::string>());
    p.delta = j.at("delta").get<double>();
    p.guards_enabled = j.at("guards").get<bool>();
    p.warmup_epochs = j.at("warmup_epochs").get<int>();
    if (!j.at("k_override").is_null()) p.k_override = j.at("k_override").get<int>();
    return p;
}

json inference_to_json(const InferenceConfig& c) {
    return json{{"chain_length", c.chain_length}, {"burn_in", c.burn_in},
                {"thinning", c.thinning},         {"proposal_scales", c.proposal_scales},
                {"seed", c.seed},                 {"quantile_delta", c.quantile_delta}};
}

InferenceConfig inference_from_json(const json& j) {
    InferenceConfig c;
    c.chain_length = j.at("chain_length").get<int>();
    c.burn_in = j.at("burn_in").get<int>();
    c.thinning = j.at("thinning").get<int>();
    c.proposal_scales = j.at("proposal_scales").get<std::vector<double>>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.quantile_delta = j.at("quantile_delta").get<double>();
    return c;
}

json config_to_json(const RaceConfig& c) {
    return json{{"horizon_T", c.horizon_T},
                {"policy", policy_to_json(c.policy)},
                {"inference", inference_to_json(c.inference)},
                {"master_seed", c.master_seed}};
}

RaceConfig config_from_json(const json& j) {
    RaceConfig c;
    c.horizon_T = j.at("horizon_T").get<int>();
    c.policy = policy_from_json(j.at("policy"));
    c.inference = inference_from_json(j.at("inference"));
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    return c;
}

}  // namespace

json report_to_json(const RaceReport& r) {
    json runs = json::array();
    for (const auto& [id, outcome] : r.per_run) {
        runs.push_back(json{{"run", id},
                            {"halted", outcome.halted},
                            {"epochs", outcome.epochs_consumed},
                            {"reason", outcome.reason}});
    }
    json thresholds = json::array();
    for (const auto& t : r.thresholds) thresholds.push_back(threshold_to_json(t));
    json halts = json::array();
    for (const auto& [epoch, ids] : r.halts_by_epoch)
        halts.push_back(json{{"epoch", epoch}, {"runs", ids}});

    json fail(nullptr);
    if (r.fail) {
        fail = json{{"run", r.fail->best_run_id},
                    {"halt_epoch", r.fail->halt_epoch},
                    {"best_final_error", r.fail->best_final_error}};
        fail["surviving_best_final_error"] = r.fail->surviving_best_final_error
                                                 ? json(*r.fail->surviving_best_final_error)
                                                 : json(nullptr);
    }

    return json{{"criterion", criterion_name(r.criterion)},
                {"delta", r.delta},
                {"guards", r.guards_enabled},
                {"master_seed", r.master_seed},
                {"horizon_T", r.horizon_T},
                {"epochs_executed", r.epochs_executed},
                {"epochs_budgeted", r.epochs_budgeted},
                {"savings", r.savings},
                {"fail", fail},
                {"runs", runs},
                {"thresholds", thresholds},
                {"halts", halts}};
}

RaceReport report_from_json(const json& j) {
    RaceReport r;
    r.criterion = criterion_from_name(j.at("criterion").get<std::string>());
    r.delta = j.at("delta").get<double>();
    r.guards_enabled = j.at("guards").get<bool>();
    r.master_seed = j.at("master_seed").get<std::uint64_t>();
    r.horizon_T = j.at("horizon_T").get<int>();
    r.epochs_executed = j.at("epochs_executed").get<long long>();
    r.epochs_budgeted = j.at("epochs_budgeted").get<long long>();
    r.savings = j.at("savings").get<double>();
    if (!j.at("fail").is_null()) {
        const json& f = j.at("fail");
        FailRecord fail;
        fail.best_run_id = f.at("run").get<std::string>();
        fail.halt_epoch = f.at("halt_epoch").get<int>();
        fail.best_final_error = f.at("best_final_error").get<double>();
        if (!f.at("surviving_best_final_error").is_null())
            fail.surviving_best_final_error = f.at("surviving_best_final_error").get<double>();
        r.fail = fail;
    }
    for (const auto& rj : j.at("runs")) {
        RunOutcome outcome;
        outcome.halted = rj.at("halted").get<bool>();
        outcome.epochs_consumed = rj.at("epochs").get<int>();
        outcome.reason = rj.at("reason").get<std::string>();
        r.per_run[rj.at("run").get<std::string>()] = outcome;
    }
    for (const auto& tj : j.at("thresholds")) r.thresholds.push_back(threshold_from_json(tj));
    for (const auto& hj : j.at("halts"))
        r.halts_by_epoch.emplace_back(hj.at("epoch").get<int>(),
                                      hj.at("runs").get<std::vector<std::string>>());
    return r;
}

json document_to_json(const ReportDocument& doc) {
    json cells = json::array();
    for (const auto& cell : doc.cells) {
        cells.push_back(json{{"criterion", criterion_name(cell.criterion)},
                             {"delta", cell.delta},
                             {"report", report_to_json(cell.report)}});
    }
    return json{{"kind", "race-report"},
                {"version", 1},
                {"corpus", doc.corpus_label},
                {"config", config_to_json(doc.config)},
                {"cells", cells}};
}

ReportDocument document_from_json(const json& j) {
    if (!j.contains("kind") || j.at("kind") != "race-report")
        throw FormatError("not a race-report document");
    ReportDocument doc;
    doc.corpus_label = j.at("corpus").get<std::string>();
    doc.config = config_from_json(j.at("config"));
    for (const auto& cj : j.at("cells")) {
        SweepCell cell;
        cell.criterion = criterion_from_name(cj.at("criterion").get<std::string>());
        cell.delta = cj.at("delta").get<double>();
        cell.report = report_from_json(cj.at("report"));
        doc.cells.push_back(std::move(cell));
    }
    return doc;
}

namespace {

// Display width differs from byte length for the minus and arrow glyphs.
std::size_t display_width(const std::string& s) {
    std::size_t continuation = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) == 0x80) ++continuation;
    return s.size() - continuation;
}

std::string pad(const std::string& s, std::size_t width, bool right_align = false) {
    std::size_t w = display_width(s);
    std::string spaces(w >= width ? 0 : width - w, ' ');
    return right_align ? spaces + s : s + spaces;
}

std::string render_table(const ReportDocument& doc) {
    std::vector<std::vector<std::string>> rows;
    std::size_t best_cell = doc.cells.size();
    double best_savings = -1.0;
    for (std::size_t i = 0; i < doc.cells.size(); ++i) {
        const auto& cell = doc.cells[i];
        if (!cell.report.fail && cell.report.savings > best_savings) {
            best_savings = cell.report.savings;
            best_cell = i;
        }
    }
    for (std::size_t i = 0; i < doc.cells.size(); ++i) {
        const auto& cell = doc.cells[i];
        char delta[16];
        std::snprintf(delta, sizeof(delta), "%.2f", cell.delta);
        rows.push_back({doc.corpus_label, std::to_string(cell.report.per_run.size()),
                        criterion_name(cell.criterion), delta, format_savings(cell.report.savings),
                        i == best_cell ? "*" : "",
                        cell.report.fail ? format_fail(*cell.report.fail) : "ok"});
    }

    const std::vector<std::string> header = {"corpus", "runs",  "criterion", "delta",
                                             "saved",  "best", "outcome"};
    const std::vector<bool> right = {false, true, false, true, true, false, false};
    std::vector<std::size_t> widths;
    for (const auto& h : header) widths.push_back(h.size());
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c)
            widths[c] = std::max(widths[c], display_width(row[c]));

    std::string out;
    auto emit_row = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += "  ";
            out += pad(row[c], widths[c], right[c]);
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    };
    emit_row(header);
    std::vector<std::string> rule;
    for (std::size_t w : widths) rule.push_back(std::string(w, '-'));
    emit_row(rule);
    for (const auto& row : rows) emit_row(row);
    return out;
}

}  // namespace

std::string emit_report(const ReportDocument& doc, ReportFormat format) {
    if (format == ReportFormat::Machine) return document_to_json(doc).dump(2) + "\n";
    return render_table(doc);
}

ReportDocument parse_report(const std::string& machine_text) {
    json j;
    try {
        j = json::parse(machine_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("report is not valid JSON: ") + e.what());
    }
    try {
        return document_from_json(j);
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad report: ") + e.what());
    }
}

// -------------------------------------------------------------- advisory ---

Advisor::Advisor(const RaceConfig& config) : config_(config) {
    config_.validate();
    fit_ = memo_.provider();
}

nlohmann::json Advisor::handle_request(const nlohmann::json& request) {
    try {
        if (!request.is_object()) throw FormatError("request must be a JSON object");
        if (!request.contains("action") || !request.at("action").is_string())
            throw FormatError("missing action");
        const std::string action = request.at("action").get<std::string>();
        if (action == "register") return do_register(request);
        if (action == "report") return do_report(request);
        if (action == "decision") return do_decision(request);
        throw FormatError("unknown action `" + action + "`");
    } catch (const std::exception& e) {
        return json{{"ok", false},
                    {"error", json{{"class", error_class_name(e)}, {"message", e.what()}}}};
    }
}

nlohmann::json Advisor::do_register(const nlohmann::json& request) {
    if (!registration_open_) throw ProtocolError("registration closed after first report");
    std::string id;
    if (request.contains("run_id")) {
        if (!request.at("run_id").is_string()) throw FormatError("run_id must be a string");
        id = request.at("run_id").get<std::string>();
        if (id.empty()) throw FormatError("run_id must be non-empty");
        if (id.find(',') != std::string::npos || id.find('\n') != std::string::npos)
            throw FormatError("run_id must not contain commas or newlines");
    } else {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "run-%02d", next_auto_id_++);
        id = buf;
    }
    if (state_.curves.count(id)) throw ProtocolError("run " + id + " already registered");

    LearningCurve curve;
    curve.run_id = id;
    curve.horizon_T = config_.horizon_T;
    state_.curves[id] = std::move(curve);
    state_.initial_runs = static_cast<int>(state_.curves.size());
    last_reported_[id] = 0;
    return json{{"ok", true}, {"action", "register"}, {"run_id", id}};
}

nlohmann::json Advisor::do_report(const nlohmann::json& request) {
    if (!request.contains("run_id") || !request.at("run_id").is_string())
        throw FormatError("report needs a run_id");
    const std::string id = request.at("run_id").get<std::string>();
    auto it = state_.curves.find(id);
    if (it == state_.curves.end()) throw NotFoundError("unknown run " + id);

    if (!request.contains("epoch") || !request.at("epoch").is_number_integer())
        throw FormatError("report needs an integer epoch");
    const int epoch = request.at("epoch").get<int>();

    double value = 0.0;
    if (!request.contains("error")) throw FormatError("report needs an error value");
    const json& vj = request.at("error");
    if (vj.is_number()) {
        value = vj.get<double>();
    } else if (vj.is_null() || (vj.is_string() && vj.get<std::string>() == "nan")) {
        value = std::numeric_limits<double>::quiet_NaN();  // flagged-invalid
    } else {
        throw FormatError("error must be a number, null, or \"nan\"");
    }

    if (it->second.state == RunState::Halted)
        throw ProtocolError("run " + id + " was halted at epoch " +
                            std::to_string(it->second.halt_epoch));
    if (it->second.state == RunState::Finished)
        throw ProtocolError("run " + id + " already finished");
    if (epoch != last_reported_[id] + 1)
        throw ProtocolError("run " + id + " must report epoch " +
                            std::to_string(last_reported_[id] + 1) + ", got " +
                            std::to_string(epoch));
    if (epoch > config_.horizon_T) throw ProtocolError("epoch beyond horizon");

    registration_open_ = false;
    pending_[id][epoch] = value;
    last_reported_[id] = epoch;
    advance_barriers();

    return json{{"ok", true}, {"action", "report"}, {"run_id", id}, {"epoch", epoch}};
}

void Advisor::advance_barriers() {
    while (state_.epoch < config_.horizon_T) {
        const int t = state_.epoch + 1;
        std::vector<std::string> alive = state_.alive_ids();
        if (alive.empty()) break;
        std::map<std::string, double> observations;
        bool complete = true;
        for (const auto& id : alive) {
            auto run = pending_.find(id);
            if (run == pending_.end() || !run->second.count(t)) {
                complete = false;
                break;
            }
            observations[id] = run->second.at(t);
        }
        if (!complete) break;
        for (const auto& id : alive) pending_[id].erase(t);
        step(state_, observations, config_, fit_);
        for (const auto& [id, curve] : state_.curves)
            if (curve.state != RunState::Alive) pending_.erase(id);
    }
}

nlohmann::json Advisor::do_decision(const nlohmann::json& request) const {
    if (!request.contains("run_id") || !request.at("run_id").is_string())
        throw FormatError("decision needs a run_id");
    const std::string id = request.at("run_id").get<std::string>();
    auto it = state_.curves.find(id);
    if (it == state_.curves.end()) throw NotFoundError("unknown run " + id);
    const LearningCurve& curve = it->second;

    json out{{"ok", true}, {"action", "decision"}, {"run_id", id}};
    if (curve.state == RunState::Halted) {
        out["decision"] = "halt";
        out["epoch"] = curve.halt_epoch;
        out["reason"] = curve.halt_reason;
        return out;
    }
    if (curve.state == RunState::Finished) {
        out["decision"] = "continue";
        out["epoch"] = curve.horizon_T;
        out["reason"] = "finished";
        return out;
    }
    const int reported = last_reported_.at(id);
    if (reported == 0 || reported > state_.epoch) {
        out["decision"] = "continue";
        out["epoch"] = state_.epoch;
        out["reason"] = "pending-barrier";
        return out;
    }
    // The barrier at `reported` is complete, so a decision exists for it.
    for (auto hist = state_.decisions_history.rbegin(); hist != state_.decisions_history.rend();
         ++hist) {
        if (hist->epoch != reported) continue;
        auto dec = hist->decisions.find(id);
        if (dec == hist->decisions.end()) break;
        out["decision"] = dec->second.halt ? "halt" : "continue";
        out["epoch"] = reported;
        out["reason"] = dec->second.reason;
        if (std::isfinite(dec->second.probability)) out["probability"] = dec->second.probability;
        if (std::isfinite(dec->second.tau)) out["tau"] = dec->second.tau;
        return out;
    }
    out["decision"] = "continue";
    out["epoch"] = reported;
    out["reason"] = "pending-barrier";
    return out;
}

// -------------------------------------------------------------- CLI glue ---

const char* error_class_name(const std::exception& e) {
    if (dynamic_cast<const FormatError*>(&e)) return "format-error";
    if (dynamic_cast<const NotFoundError*>(&e)) return "not-found";
    if (dynamic_cast<const ProtocolError*>(&e)) return "protocol-error";
    if (dynamic_cast<const InsufficientDataError*>(&e)) return "insufficient-data";
    if (dynamic_cast<const DomainError*>(&e)) return "domain-error";
    if (dynamic_cast<const IoError*>(&e)) return "io-error";
    return "internal-error";
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const FormatError*>(&e)) return 65;
    if (dynamic_cast<const NotFoundError*>(&e)) return 67;
    if (dynamic_cast<const ProtocolError*>(&e)) return 68;
    if (dynamic_cast<const InsufficientDataError*>(&e)) return 69;
    if (dynamic_cast<const DomainError*>(&e)) return 66;
    if (dynamic_cast<const IoError*>(&e)) return 74;
    return 70;
}

}  // namespace runrace
