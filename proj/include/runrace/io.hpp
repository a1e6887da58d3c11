#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "runrace/race.hpp"

namespace runrace {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// ---------------------------------------------------------------- traces ---

// CSV with the exact header `run_id,epoch,validation_error`. Epochs per run
// must arrive dense and ascending from 1; values must be >= 0 (or nan for a
// flagged-invalid measurement). Violations raise FormatError with the line.
TraceMap parse_trace_csv(const std::string& text);

// Canonical form: runs in lexicographic order, epochs ascending, shortest
// round-trip number formatting. emit(parse(emit(x))) == emit(x).
std::string emit_trace_csv(const TraceMap& traces);

struct Manifest {
    int horizon_T = 0;
    std::vector<std::string> runs;
    std::map<std::string, SynthTruth> truth;  // present for synthetic corpora

    bool operator==(const Manifest&) const = default;
};

Manifest parse_manifest(const std::string& text);
std::string emit_manifest(const Manifest& manifest);

// "traces.csv" -> "traces.manifest.json"
std::string manifest_path_for(const std::string& trace_path);

struct Corpus {
    TraceMap traces;
    Manifest manifest;
};

// Reads the csv and its sidecar. Without a sidecar the horizon is inferred
// from the (equal) trace lengths.
Corpus load_corpus(const std::string& trace_path,
                   const std::optional<std::string>& manifest_path = std::nullopt);

void write_corpus(const std::string& trace_path, const TraceMap& traces,
                  const Manifest& manifest);

// --------------------------------------------------------------- reports ---

enum class ReportFormat { Machine, Table };

struct ReportDocument {
    std::string corpus_label = "corpus";
    RaceConfig config;
    std::vector<SweepCell> cells;

    bool operator==(const ReportDocument&) const = default;
};

// Savings fraction as a signed percentage cell: 0.721 -> "−72.1%" (the sign
// marks work removed). Exactly 0 renders "0.0%".
std::string format_savings(double fraction);

// "FAIL by 1.083 → 1.164"; "none" when no run survived.
std::string format_fail(const FailRecord& fail);

nlohmann::json report_to_json(const RaceReport& report);
RaceReport report_from_json(const nlohmann::json& j);
nlohmann::json document_to_json(const ReportDocument& doc);
ReportDocument document_from_json(const nlohmann::json& j);

// Machine form parses back losslessly; the table form is for terminals, one
// row per cell with a best-saver marker among rows without a FAIL.
std::string emit_report(const ReportDocument& doc, ReportFormat format);
ReportDocument parse_report(const std::string& machine_text);

// -------------------------------------------------------------- advisory ---

// Barrier-synchronized advisory service over JSON request/response objects.
// Actions: register (before any report), report (dense epochs per run),
// decision (poll the verdict for a run's last reported epoch). Decisions are
// computed once all alive runs have reported an epoch, through the same step
// path the offline replay uses.
class Advisor {
public:
    explicit Advisor(const RaceConfig& config);

    nlohmann::json handle_request(const nlohmann::json& request);

    const RaceState& state() const { return state_; }

private:
    nlohmann::json do_register(const nlohmann::json& request);
    nlohmann::json do_report(const nlohmann::json& request);
    nlohmann::json do_decision(const nlohmann::json& request) const;
    void advance_barriers();

    RaceConfig config_;
    RaceState state_;
    MemoFitProvider memo_;
    FitProvider fit_;
    bool registration_open_ = true;
    int next_auto_id_ = 0;
    std::map<std::string, std::map<int, double>> pending_;
    std::map<std::string, int> last_reported_;
};

// -------------------------------------------------------------- CLI glue ---

const char* error_class_name(const std::exception& e);
int exit_code_for(const std::exception& e);

}  // namespace runrace
