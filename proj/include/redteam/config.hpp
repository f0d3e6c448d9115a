#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "redteam/core.hpp"
#include "redteam/evolve.hpp"
#include "redteam/targets.hpp"

namespace redteam {

struct SeedTemplate {
    AttackCategory category = AttackCategory::PromptInjection;
    std::string text;
    DomainTag domain = DomainTag::General;

    friend bool operator==(const SeedTemplate&, const SeedTemplate&) = default;
};

enum class SearchStrategy { Genetic, RandomMutation };

/// Fully defaulted, validated campaign configuration. Build one with
/// validate_config(); the struct itself does not re-check invariants.
struct CampaignConfig {
    std::uint64_t seed = 0;
    std::uint64_t episodes = 200;
    std::size_t population_size = 100;
    std::size_t tournament_base = 5;
    double mutation_rate0 = 0.1;
    std::size_t elite_count = 5;
    evolve::FitnessWeights fitness_weights;
    std::vector<targets::TargetSpec> targets;
    std::vector<SeedTemplate> seed_corpus;
    std::string lexicon_path;
    std::string benign_corpus_path;
    std::string output_dir = "campaign";

    // Campaign-loop settings.
    std::size_t proposals_per_attacker = 2;
    std::vector<AttackCategory> attackers;
    bool defenders_enabled = true;
    SearchStrategy strategy = SearchStrategy::Genetic;
    std::map<AttackCategory, double> category_impact;
    std::uint32_t snapshot_every = 10;
    std::optional<targets::RemoteSpec> paraphraser;
    std::optional<targets::RemoteSpec> judge;

    /// Directory that relative paths resolve against (not serialized).
    std::filesystem::path base_dir;
    /// SHA-256 of canonical_json() minus output_dir.
    std::string config_hash;

    [[nodiscard]] json canonical_json() const;
    [[nodiscard]] evolve::GaParams ga_params() const;
    [[nodiscard]] std::filesystem::path resolve(const std::string& path) const;
    [[nodiscard]] double impact_for(AttackCategory c) const;
};

/// Built-in seed templates used when a config names none.
const std::vector<SeedTemplate>& default_seed_corpus();
const std::map<AttackCategory, double>& default_category_impact();

/// Validates a parsed document, applies defaults and computes config_hash.
/// Throws ValidationError naming the offending field.
CampaignConfig validate_config(const json& raw, const std::filesystem::path& base_dir = {});

/// Reads and validates a JSON config file; relative paths resolve against its directory.
CampaignConfig load_config(const std::filesystem::path& path, const json& overrides = json::object());

/// Reads one non-empty line per entry (benign corpus format).
std::vector<std::string> load_lines(const std::filesystem::path& path);

}  // namespace redteam
