#pragma once

// Scalarized multi-objective fitness and the genetic-algorithm generation step.
//
//   f(x) = alpha*ASR + beta*SIM(x, origin) + gamma*DIV(x, P) + delta*TRANS + epsilon*SEVER
//
// All five components live in [0,1]. Ordering everywhere is by descending
// fitness with ties broken by ascending genome id, which keeps replays stable.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "redteam/core.hpp"
#include "redteam/mutation.hpp"
#include "redteam/rng.hpp"
#include "redteam/textops.hpp"

namespace redteam::evolve {

struct FitnessWeights {
    double alpha = 0.4;
    double beta = 0.1;
    double gamma = 0.2;
    double delta = 0.15;
    double epsilon = 0.15;

    friend bool operator==(const FitnessWeights&, const FitnessWeights&) = default;
};

struct FitnessComponents {
    double asr = 0.0;
    double sim = 0.0;
    double div = 0.0;
    double trans = 0.0;
    double sever = 0.0;

    friend bool operator==(const FitnessComponents&, const FitnessComponents&) = default;
};

/// Judge outcome for one target query.
struct TargetResult {
    std::string target_id;
    bool success = false;
    double score = 0.0;
    bool unreachable = false;
    std::optional<std::string> rule_id;
};

/// Everything the evaluator reports for one genome.
struct EvalOutcome {
    std::vector<TargetResult> results;
    bool blocked = false;
    /// Not evaluated because the episode budget ran out.
    bool skipped = false;
    double quality = 0.0;
    /// Impact subscore used for the severity term when the genome succeeds.
    double impact = 0.0;
    std::vector<std::string> warnings;

    [[nodiscard]] bool any_success() const noexcept;
};

using Evaluator = std::function<EvalOutcome(const AttackGenome&)>;

struct Member {
    AttackGenome genome;
    textops::FeatureVector embedding;
    FitnessComponents components;
    double fitness = 0.0;
    bool evaluated = false;
    EvalOutcome outcome;
};

Member make_member(AttackGenome genome);

struct Population {
    std::vector<Member> members;
    std::size_t capacity = 0;
    double best_fitness = 0.0;
    std::uint32_t stagnation = 0;
    std::uint32_t generation = 0;

    /// Descending fitness, ties by ascending id.
    void sort();
};

struct GaParams {
    std::size_t population_size = 100;
    std::size_t tournament_base = 5;
    double rate0 = 0.1;
    double rate_min = 0.02;
    double rate_max = 0.5;
    std::size_t elite_count = 5;
    std::uint32_t stagnation_window = 5;
    double stagnation_boost = 1.5;

    static std::size_t default_elite_count(std::size_t population_size) {
        return std::max<std::size_t>(1, population_size / 20);
    }
};

/// Fixed-order weighted sum; throws NumericError on a non-finite result.
double aggregate(const FitnessComponents& c, const FitnessWeights& w);

/// Throws PreconditionError when the outcome holds no target result.
FitnessComponents eval_components(const AttackGenome& genome, const std::vector<const Member*>& population,
                                  const EvalOutcome& outcome);

/// Mean pairwise cosine distance; 0 for fewer than two members.
double diversity(const Population& population);
double diversity(const std::vector<std::string>& texts);

std::size_t adaptive_tournament_size(std::size_t k_base, double diversity, std::uint32_t stagnation,
                                     std::uint32_t stagnation_window = 5);

double adaptive_mutation_rate(const GaParams& params, double diversity, std::uint32_t stagnation);

/// Tournament of k uniform draws with replacement. Throws on an empty population.
const Member& select(const Population& population, std::size_t k, Rng& rng);

/// Segment-alternating crossover; on coherence failure returns a clone of the
/// fitter parent under the new id.
AttackGenome crossover(const Member& a, const Member& b, Rng& rng, std::string new_id);

struct StepStats {
    double diversity = 0.0;
    std::size_t tournament_size = 0;
    double mutation_rate = 0.0;
    std::size_t evaluated = 0;
};

struct StepResult {
    Population population;
    /// Genomes evaluated during this step that succeeded on at least one target, in id order.
    std::vector<Member> discoveries;
    /// Every genome evaluated during this step, in evaluation order.
    std::vector<Member> evaluated;
    std::vector<std::string> warnings;
    StepStats stats;
};

StepResult step(const Population& population, const GaParams& params, const FitnessWeights& weights,
                const Evaluator& evaluate, const mutation::MutationContext& ctx, Rng& rng, IdSource& ids);

/// SHA-256 over (id, text, fitness) of every member in order.
std::string population_digest(const Population& population);

void to_json(json& j, const FitnessWeights& w);
void to_json(json& j, const FitnessComponents& c);
void to_json(json& j, const TargetResult& r);
void to_json(json& j, const Member& m);

}  // namespace redteam::evolve
