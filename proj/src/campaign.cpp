#include "redteam/campaign.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "redteam/errors.hpp"

namespace redteam::campaign {
namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kMaxStalledRounds = 25;
constexpr std::string_view kProbePrompt = "Hello, what is the capital of France?";

// Effective configuration with every path made absolute, so the copy inside
// the campaign directory can be reloaded from anywhere.
// The effective config plus the directory its relative paths resolve
// against, so a finished campaign can be reloaded with an identical hash.
json portable_config(const CampaignConfig& cfg) {
    json j = cfg.canonical_json();
    j["base_dir"] = fs::absolute(cfg.base_dir).lexically_normal().generic_string();
    return j;
}

class LineWriter {
public:
    explicit LineWriter(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("cannot write " + path.string());
    }
    void write(const json& j) {
        out_ << canonical_dump(j) << '\n';
        out_.flush();
        if (!out_) throw IoError("write to " + path_.string() + " failed");
    }

private:
    fs::path path_;
    std::ofstream out_;
};

void write_snapshot(const fs::path& dir, std::uint32_t generation, const evolve::Population& pop) {
    LineWriter w(dir / ("gen_" + std::to_string(generation) + ".jsonl"));
    for (const auto& m : pop.members) w.write(m);
}

}  // namespace

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) throw IoError("campaign directory " + dir.string() + " is locked by another run");
        throw IoError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

DirectoryLock::~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

std::string campaign_id(const CampaignConfig& config) { return "c-" + config.config_hash.substr(0, 12); }

CampaignSummary run_campaign(const CampaignConfig& config, const fs::path& out_dir, const RunOptions& options) {
    auto ctx = agents::CampaignContext::from_config(config);

    // Refuse to start when no target answers at all.
    bool any_reachable = false;
    for (const auto& t : ctx.targets)
        if (t->respond(kProbePrompt).status == targets::ResponseStatus::Ok) {
            any_reachable = true;
            break;
        }
    if (!any_reachable) throw TargetUnreachable("no configured target is reachable");

    fs::create_directories(out_dir);
    DirectoryLock lock(out_dir);
    for (const char* stale : {"events.jsonl", "vulns.jsonl", "metrics.jsonl", "report.md", "report.json"})
        fs::remove(out_dir / stale);
    fs::remove_all(out_dir / "snapshots");
    fs::create_directories(out_dir / "snapshots");
    {
        std::ofstream cfg_out(out_dir / "config.json", std::ios::binary | std::ios::trunc);
        cfg_out << portable_config(config).dump(2) << '\n';
        if (!cfg_out.flush()) throw IoError("cannot write config.json");
    }

    audit::AuditLog log(out_dir / "events.jsonl", options.clock);
    LineWriter vulns(out_dir / "vulns.jsonl");
    LineWriter metrics_out(out_dir / "metrics.jsonl");

    json start = config.canonical_json();
    start.erase("output_dir");
    start["campaign_id"] = campaign_id(config);
    start["config_hash"] = config.config_hash;
    json target_ids = json::array();
    for (const auto& t : ctx.targets) target_ids.push_back(t->id());
    start["target_ids"] = target_ids;
    json roster = json::array();
    for (const auto& r : ctx.roster) roster.push_back(r.agent_id());
    start["roster"] = roster;
    log.record_event(0, audit::EventKind::CampaignStart, start);

    CampaignSummary summary;
    std::uint32_t stalled = 0;
    auto state = agents::initial_state(config);
    while (state.episodes_used < config.episodes) {
        auto outcome = agents::coordinator_round(state, ctx);
        for (const auto& m : outcome.messages) {
            json payload = m.payload;
            payload["sender"] = m.sender;
            log.record_event(m.round, m.kind, std::move(payload));
        }
        for (const auto& v : outcome.new_vulns) vulns.write(v);
        metrics_out.write(outcome.messages.back().payload);
        const bool progressed = outcome.state.episodes_used > state.episodes_used;
        if (options.on_round) options.on_round(outcome);
        state = std::move(outcome.state);
        summary.diversity_by_round.push_back(outcome.stats.diversity);
        summary.coverage_by_round.push_back(outcome.stats.coverage);
        if (config.snapshot_every > 0 && state.round % config.snapshot_every == 0)
            write_snapshot(out_dir / "snapshots", state.round, state.population);
        // Rounds in which every genome is blocked spend nothing; stop rather
        // than spin when the defenders have closed every path.
        stalled = progressed ? 0 : stalled + 1;
        if (stalled >= kMaxStalledRounds) {
            log.record_event(state.round, audit::EventKind::Warning,
                             json{{"sender", "coordinator"},
                                  {"message", "no target queried for " + std::to_string(stalled) +
                                                  " consecutive rounds; stopping early"}});
            break;
        }
    }

    summary.rounds = state.round;
    summary.discoveries = state.vulns.size();
    summary.final_asr = state.attempts == 0 ? 0.0 : static_cast<double>(state.successes) / state.attempts;
    summary.episodes_used = state.episodes_used;
    summary.rules_compromised = state.rules_compromised.size();
    summary.final_coverage = summary.coverage_by_round.empty() ? 0.0 : summary.coverage_by_round.back();
    log.record_event(state.round, audit::EventKind::CampaignEnd,
                     json{{"rounds", summary.rounds},
                          {"discoveries", summary.discoveries},
                          {"final_asr", summary.final_asr},
                          {"episodes_used", summary.episodes_used},
                          {"confirmation_queries", state.confirmation_queries},
                          {"rules_compromised", summary.rules_compromised}});
    return summary;
}

std::vector<VulnerabilityRecord> load_vulns(const fs::path& campaign_dir) {
    std::ifstream in(campaign_dir / "vulns.jsonl", std::ios::binary);
    if (!in) throw IoError("cannot read " + (campaign_dir / "vulns.jsonl").string());
    std::vector<VulnerabilityRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line).get<VulnerabilityRecord>());
        } catch (const json::exception& e) {
            throw IoError("malformed vulns.jsonl line: " + std::string(e.what()));
        }
    }
    return out;
}

CampaignConfig load_campaign_config(const fs::path& campaign_dir) {
    const auto path = campaign_dir / "config.json";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    json raw = json::parse(in, nullptr, false);
    if (raw.is_discarded() || !raw.is_object()) throw ValidationError("config", path.string() + " is not a JSON object");
    const fs::path base = raw.value("base_dir", std::string());
    raw.erase("base_dir");
    return validate_config(raw, base);
}

}  // namespace redteam::campaign
