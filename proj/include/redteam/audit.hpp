#pragma once

// Hash-chained, append-only campaign log plus the documents and reports built
// on top of it.
//
// events.jsonl holds one canonical JSON object per line:
//
//   {"hash":..,"kind":..,"payload":{..},"prev_hash":..,"round":..,"seq":..,"ts":..,"ts_seal":..}
//
// hash    = SHA-256(canonical {kind, payload, prev_hash, round, seq})
// ts_seal = SHA-256(hash + "|" + ts)
//
// The wall-clock timestamp stays out of the chain hash so identical campaigns
// produce identical chains; the seal still makes the timestamp tamper-evident.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "redteam/core.hpp"

namespace redteam::audit {

enum class EventKind {
    CampaignStart,
    Directive,
    Proposal,
    Evaluation,
    Discovery,
    DefenseUpdate,
    RoundSummary,
    Warning,
    CampaignEnd,
};

std::string_view to_string(EventKind k);
EventKind parse_event_kind(std::string_view name);

inline const std::string kGenesisHash(64, '0');

struct AuditEvent {
    std::uint64_t seq = 0;
    std::uint32_t round = 0;
    EventKind kind = EventKind::Warning;
    json payload;
    std::string prev_hash;
    std::string hash;
    std::string ts;
    std::string ts_seal;
};

/// Chain hash over every field except hash, ts and ts_seal.
std::string event_hash(const AuditEvent& e);
std::string seal(const std::string& hash, const std::string& ts);
/// The exact line written for an event (no trailing newline).
std::string serialize(const AuditEvent& e);

using Clock = std::function<std::string()>;
/// UTC ISO-8601 timestamp with millisecond precision.
std::string utc_now();

class AuditLog {
public:
    /// Opens (creating if needed) a log for appending. An existing log must
    /// verify; its tail supplies the next seq and prev_hash.
    explicit AuditLog(std::filesystem::path path, Clock clock = utc_now);

    /// Appends one event and flushes. Throws IoError; on failure the
    /// in-memory tail is not advanced.
    AuditEvent record_event(std::uint32_t round, EventKind kind, json payload);

    [[nodiscard]] std::uint64_t next_seq() const noexcept { return next_seq_; }
    [[nodiscard]] const std::string& tail_hash() const noexcept { return tail_hash_; }
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    Clock clock_;
    std::ofstream out_;
    std::uint64_t next_seq_ = 0;
    std::string tail_hash_ = kGenesisHash;
};

struct VerifyResult {
    bool ok = true;
    std::uint64_t corrupt_seq = 0;
    std::size_t events = 0;

    explicit operator bool() const noexcept { return ok; }
};

/// Recomputes the whole chain. Throws IoError if the file cannot be read.
VerifyResult verify_log(const std::filesystem::path& path);

/// Verifies, then parses every event. Throws AuditCorrupt on a broken chain.
std::vector<AuditEvent> read_events(const std::filesystem::path& path);

/// Structured vulnerability document: description, risk, reproduction, timeline.
json document_vulnerability(const VulnerabilityRecord& record, const std::string& campaign_dir = "<campaign>");

enum class ReportFormat { Markdown, Structured };

/// Aggregated view of a campaign, computed from its verified event log.
json build_report_summary(const std::vector<AuditEvent>& events);
std::string render_markdown(const json& summary);

/// Verifies <campaign_dir>/events.jsonl and writes report.md or report.json.
/// Throws AuditCorrupt when the chain does not verify.
std::filesystem::path generate_report(const std::filesystem::path& campaign_dir, ReportFormat format);

}  // namespace redteam::audit
