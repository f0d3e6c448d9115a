#pragma once

// Prompt transformation operators. Every operator is a pure function of its
// inputs and the generator it is handed, so any lineage can be replayed from
// its origin text and recorded operator steps.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "redteam/core.hpp"
#include "redteam/rng.hpp"

namespace redteam::mutation {

class Lexicon {
public:
    Lexicon() = default;

    /// Parses "token: syn1, syn2, ..." lines. Blank lines and lines starting
    /// with '#' are skipped. Throws IoError / ValidationError.
    static Lexicon load(const std::filesystem::path& path);
    static Lexicon parse(std::string_view contents);

    /// Adds synonyms for a token; the token is canonicalized first.
    void add(std::string_view token, std::vector<std::string> synonyms);

    /// Case-insensitive lookup; nullptr if absent.
    [[nodiscard]] const std::vector<std::string>* find(std::string_view token) const;

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }

private:
    std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

struct ParaphraseRule {
    std::string_view pattern;
    std::string_view replacement;
};

/// The built-in rewrite table, scanned in order; first match wins.
const std::vector<ParaphraseRule>& paraphrase_rules();

/// Optional external rewriter (e.g. a remote paraphrasing model). Returns
/// nullopt when unavailable, in which case the rule table is used.
using Rewriter = std::function<std::optional<std::string>(std::string_view)>;

struct MutationContext {
    const Lexicon* lexicon = nullptr;
    Rewriter rewriter;
    /// Receives human-readable warnings (e.g. rewriter fallback).
    std::vector<std::string>* warnings = nullptr;
};

std::string synonym_replace(std::string_view text, const Lexicon& lexicon, double rate, Rng& rng);

std::string paraphrase(std::string_view text, Rng& rng);

/// ceil(intensity * max(1, len) / 20) character-level edits; len counts code points.
std::size_t noise_edit_count(std::string_view text, double intensity);
std::string noise_insert(std::string_view text, double intensity, Rng& rng);

/// Picks prefix-wrap, interleave or sandwich uniformly.
std::string compose(std::string_view a, std::string_view b, Rng& rng);

/// Segment alternation with coherence retries (swapped roles, then shuffled
/// segment order). nullopt when no attempt reaches coherence 0.5.
std::optional<std::string> crossover_text(std::string_view a, std::string_view b, Rng& rng);

/// Two-parent genome built with compose(); records a Compose step whose donor
/// is `b`.
AttackGenome compose_genome(const AttackGenome& a, const AttackGenome& b, Rng& rng, std::string new_id);

/// Applies one uniformly chosen single-parent operator and returns the child.
/// Synonym replacement uses `rate` per token; noise uses it as intensity.
AttackGenome mutate(const AttackGenome& genome, double rate, const MutationContext& ctx, Rng& rng,
                    std::string new_id);

std::uint64_t child_seed(std::uint64_t parent_seed) noexcept;
std::uint64_t child_seed(std::uint64_t parent_seed, std::uint64_t donor_seed) noexcept;

/// Re-applies one recorded step to `text`.
std::string apply_step(std::string_view text, const OperatorStep& step, const MutationContext& ctx);

/// Re-applies a whole history starting from the origin text.
std::string replay(std::string_view origin_text, const std::vector<OperatorStep>& history,
                   const MutationContext& ctx);

}  // namespace redteam::mutation
