#pragma once

// The campaign loop: attackers propose, the evaluator scores through the
// defender filters, the defender learns token filters from fresh successes,
// and the coordinator sequences one round at a time.
//
// A round is transactional: coordinator_round() takes the state by const
// reference and returns the successor plus the messages to log, so an
// exception leaves the caller's state and log untouched.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "redteam/audit.hpp"
#include "redteam/config.hpp"
#include "redteam/core.hpp"
#include "redteam/evolve.hpp"
#include "redteam/metrics.hpp"
#include "redteam/mutation.hpp"
#include "redteam/rng.hpp"
#include "redteam/targets.hpp"

namespace redteam::agents {

enum class RoleKind { Attacker, Evaluator, Defender, Coordinator };

struct AgentRole {
    RoleKind kind = RoleKind::Coordinator;
    std::optional<AttackCategory> specialty;  // attackers only

    /// "attacker:<category>", "evaluator", "defender" or "coordinator".
    [[nodiscard]] std::string agent_id() const;
};

/// One immutable message; logged verbatim as an audit event.
struct Message {
    audit::EventKind kind = audit::EventKind::Warning;
    std::string sender;
    std::uint32_t round = 0;
    json payload;
};

inline constexpr std::size_t kFilterCap = 100;

struct DefenderFilter {
    /// Canonical tokens, most frequent first; a prompt matches when it holds all of them.
    std::vector<std::string> tokens;
    /// Mock rule id, or "category:<name>" for groups without one.
    std::string group;
    std::uint32_t created_round = 0;
    std::uint64_t hits = 0;
    std::uint32_t last_hit_round = 0;

    friend bool operator==(const DefenderFilter&, const DefenderFilter&) = default;
};

void to_json(json& j, const DefenderFilter& f);

/// True iff some filter's tokens all occur in the prompt's canonical tokens.
/// Every matching filter's hit counter (and last-hit round) is updated.
bool apply_filters(std::vector<DefenderFilter>& filters, std::string_view prompt, std::uint32_t round = 0);

/// Same predicate without touching any counter.
bool filters_block(const std::vector<DefenderFilter>& filters, std::string_view prompt);

struct EpisodeBudget {
    std::uint64_t limit = 0;
    std::uint64_t used = 0;

    [[nodiscard]] bool exhausted() const noexcept { return used >= limit; }
};

using JudgeFn = std::function<targets::JudgeVerdict(const targets::TargetResponse&)>;

/// Scores one genome. Blocked genomes fail on every target without a query.
/// Each target query consumes one episode; once the budget is gone the
/// remaining targets are skipped (skipped is set if nothing was queried).
evolve::EvalOutcome evaluator_assess(const AttackGenome& genome, std::vector<DefenderFilter>& filters,
                                     const std::vector<targets::Target*>& targets, const JudgeFn& judge,
                                     EpisodeBudget& budget, double impact, std::uint32_t round = 0);

/// 0.7 * mean judge score + 0.3 * coherence(text).
double assessment_quality(const std::vector<double>& judge_scores, std::string_view text);

/// A judged-successful prompt and the group it compromised.
struct SuccessfulPrompt {
    std::string text;
    std::string group;
};

/// Builds at most one new filter per group from tokens present in >= 80% of
/// the group's prompts and absent from every benign line, then appends them
/// to `filters`, evicting least-recently-hit filters beyond kFilterCap.
/// Returns the filters that were added.
std::vector<DefenderFilter> defender_update(const std::vector<SuccessfulPrompt>& discoveries,
                                            const std::set<std::string>& benign_tokens,
                                            std::vector<DefenderFilter>& filters, std::uint32_t round);

/// Canonical token set of a benign corpus.
std::set<std::string> benign_token_set(const std::vector<std::string>& lines);

/// Draws `count` templates of the specialty and applies one operator to each
/// (compose with a second template for the compositional specialty, mutate
/// otherwise). An empty list plus a warning when no template exists.
std::vector<AttackGenome> attacker_propose(const std::vector<SeedTemplate>& corpus, AttackCategory specialty,
                                           std::size_t count, double rate, const mutation::MutationContext& ctx,
                                           Rng& rng, IdSource& ids, std::vector<std::string>* warnings = nullptr);

/// Everything a campaign needs that is not evolving state.
struct CampaignContext {
    CampaignConfig config;
    std::vector<std::unique_ptr<targets::Target>> targets;
    mutation::Lexicon lexicon;
    std::set<std::string> benign_tokens;
    std::optional<targets::RemoteJudge> remote_judge;
    mutation::Rewriter rewriter;
    std::vector<AgentRole> roster;

    /// Loads lexicon, benign corpus and targets named by the config.
    static CampaignContext from_config(const CampaignConfig& config);

    [[nodiscard]] std::vector<targets::Target*> target_ptrs() const;
    [[nodiscard]] targets::JudgeVerdict judge(const targets::TargetResponse& response) const;
};

struct CampaignState {
    std::uint32_t round = 0;
    std::uint64_t episodes_used = 0;
    /// Repeat queries used for exploitability; not charged to the budget.
    std::uint64_t confirmation_queries = 0;
    evolve::Population population;
    std::vector<DefenderFilter> filters;
    std::vector<VulnerabilityRecord> vulns;
    metrics::ResultsMatrix results;
    std::map<std::string, std::string> origin;
    std::set<std::string> recorded;
    std::set<std::string> rules_compromised;
    std::uint64_t attempts = 0;
    std::uint64_t successes = 0;
    std::uint64_t next_genome = 0;
    std::uint64_t next_vuln = 0;
    Rng rng;
};

CampaignState initial_state(const CampaignConfig& config);

struct RoundStats {
    double asr = 0.0;
    double diversity = 0.0;
    double coverage = 0.0;
    std::size_t discoveries = 0;
};

struct RoundOutcome {
    CampaignState state;
    std::vector<Message> messages;
    /// Records created this round, in id order.
    std::vector<VulnerabilityRecord> new_vulns;
    RoundStats stats;
};

/// One coordinator round. Throws NoBudget when the budget is already spent.
RoundOutcome coordinator_round(const CampaignState& state, CampaignContext& ctx);

}  // namespace redteam::agents
