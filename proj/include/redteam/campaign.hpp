#pragma once

// Drives coordinator rounds until the episode budget is spent and persists
// everything into a campaign directory:
//
//   <dir>/config.json          effective (post-override) configuration
//   <dir>/events.jsonl         hash-chained audit log
//   <dir>/vulns.jsonl          one VulnerabilityRecord per line
//   <dir>/metrics.jsonl        one RoundSummary payload per line
//   <dir>/snapshots/gen_N.jsonl  population every snapshot_every rounds
//   <dir>/.lock                held while a run is active

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "redteam/agents.hpp"
#include "redteam/audit.hpp"
#include "redteam/config.hpp"

namespace redteam::campaign {

/// Exclusive lock on a campaign directory, released on destruction.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    std::filesystem::path path_;
};

struct CampaignSummary {
    std::uint32_t rounds = 0;
    std::size_t discoveries = 0;
    double final_asr = 0.0;
    std::uint64_t episodes_used = 0;
    std::size_t rules_compromised = 0;
    double final_coverage = 0.0;
    std::vector<double> diversity_by_round;
    std::vector<double> coverage_by_round;
};

struct RunOptions {
    audit::Clock clock = audit::utc_now;
    /// Called after each completed round.
    std::function<void(const agents::RoundOutcome&)> on_round;
};

/// campaign_id derived from the config hash.
std::string campaign_id(const CampaignConfig& config);

/// Runs a full campaign into `out_dir`. Throws TargetUnreachable when every
/// target fails a probe before the first round; any later failure leaves the
/// log complete through the last finished round.
CampaignSummary run_campaign(const CampaignConfig& config, const std::filesystem::path& out_dir,
                             const RunOptions& options = {});

/// Reads vulns.jsonl.
std::vector<VulnerabilityRecord> load_vulns(const std::filesystem::path& campaign_dir);

/// Reads config.json of a finished campaign (relative paths resolve against
/// the directory the original config lived in, which config.json records).
CampaignConfig load_campaign_config(const std::filesystem::path& campaign_dir);

}  // namespace redteam::campaign
