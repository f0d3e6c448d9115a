#include "redteam/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "redteam/errors.hpp"
#include "redteam/metrics.hpp"

namespace redteam::evolve {
namespace {

bool ranks_before(const Member& a, const Member& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    return a.genome.id < b.genome.id;
}

// Tolerates an empty result list (failed or skipped evaluation): the genome
// then scores zero on every outcome-derived term.
FitnessComponents components_from(const AttackGenome& genome, const textops::FeatureVector& embedding,
                                  const std::vector<const Member*>& population, const EvalOutcome& outcome) {
    FitnessComponents c;
    c.sim = textops::similarity(genome.text, genome.origin_text);

    double dist_sum = 0.0;
    std::size_t others = 0;
    for (const Member* m : population) {
        if (m->genome.id == genome.id) continue;
        dist_sum += 1.0 - textops::cosine(embedding, m->embedding);
        ++others;
    }
    c.div = (population.size() < 2 || others == 0) ? 0.0 : dist_sum / static_cast<double>(others);

    if (outcome.results.empty()) return c;
    double score_sum = 0.0;
    std::size_t successes = 0;
    std::set<std::string> attacked;
    std::set<std::string> compromised;
    for (const auto& r : outcome.results) {
        score_sum += r.success ? 1.0 : r.score;
        attacked.insert(r.target_id);
        if (r.success) {
            ++successes;
            compromised.insert(r.target_id);
        }
    }
    const double attempts = static_cast<double>(outcome.results.size());
    c.asr = score_sum / attempts;
    c.trans = static_cast<double>(compromised.size()) / static_cast<double>(attacked.size());
    if (successes > 0) {
        const double exploitability = static_cast<double>(successes) / attempts;
        c.sever = metrics::vsi(exploitability, std::clamp(outcome.impact, 0.0, 1.0), 1.0) / 5.0;
    }
    return c;
}

std::vector<const Member*> pointers(const std::vector<Member>& members) {
    std::vector<const Member*> out;
    out.reserve(members.size());
    for (const auto& m : members) out.push_back(&m);
    return out;
}

EvalOutcome safe_evaluate(const Evaluator& evaluate, const AttackGenome& genome) {
    try {
        return evaluate(genome);
    } catch (const std::exception& e) {
        EvalOutcome failed;
        failed.warnings.push_back("evaluation of " + genome.id + " failed: " + e.what());
        return failed;
    }
}

}  // namespace

bool EvalOutcome::any_success() const noexcept {
    return std::any_of(results.begin(), results.end(), [](const TargetResult& r) { return r.success; });
}

Member make_member(AttackGenome genome) {
    Member m;
    m.embedding = textops::embed(genome.text);
    m.genome = std::move(genome);
    return m;
}

void Population::sort() { std::sort(members.begin(), members.end(), ranks_before); }

double aggregate(const FitnessComponents& c, const FitnessWeights& w) {
    double f = w.alpha * c.asr;
    f += w.beta * c.sim;
    f += w.gamma * c.div;
    f += w.delta * c.trans;
    f += w.epsilon * c.sever;
    if (!std::isfinite(f)) throw NumericError("fitness is not finite");
    return f;
}

FitnessComponents eval_components(const AttackGenome& genome, const std::vector<const Member*>& population,
                                  const EvalOutcome& outcome) {
    if (outcome.results.empty()) throw PreconditionError("evaluation holds no target result");
    return components_from(genome, textops::embed(genome.text), population, outcome);
}

double diversity(const Population& population) {
    const auto& m = population.members;
    if (m.size() < 2) return 0.0;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = i + 1; j < m.size(); ++j) {
            sum += 1.0 - textops::cosine(m[i].embedding, m[j].embedding);
            ++pairs;
        }
    return sum / static_cast<double>(pairs);
}

double diversity(const std::vector<std::string>& texts) {
    Population p;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        AttackGenome g;
        g.text = texts[i];
        p.members.push_back(make_member(std::move(g)));
    }
    return diversity(p);
}

std::size_t adaptive_tournament_size(std::size_t k_base, double diversity, std::uint32_t stagnation,
                                     std::uint32_t stagnation_window) {
    const double raw = std::round(static_cast<double>(k_base) * (1.5 - diversity));
    const double hi = 2.0 * static_cast<double>(k_base);
    auto k = static_cast<std::size_t>(std::clamp(raw, 2.0, std::max(2.0, hi)));
    if (stagnation >= stagnation_window) k = std::max<std::size_t>(2, k - 1);
    return k;
}

double adaptive_mutation_rate(const GaParams& params, double diversity, std::uint32_t stagnation) {
    double r = std::clamp(params.rate0 * (1.0 + (0.5 - diversity)), params.rate_min, params.rate_max);
    if (stagnation >= params.stagnation_window) r = std::min(params.rate_max, r * params.stagnation_boost);
    return r;
}

const Member& select(const Population& population, std::size_t k, Rng& rng) {
    const auto& m = population.members;
    if (m.empty()) throw PreconditionError("cannot select from an empty population");
    const Member* best = nullptr;
    for (std::size_t i = 0; i < std::max<std::size_t>(1, k); ++i) {
        const Member& cand = m[rng.below(m.size())];
        if (best == nullptr || ranks_before(cand, *best)) best = &cand;
    }
    return *best;
}

AttackGenome crossover(const Member& a, const Member& b, Rng& rng, std::string new_id) {
    OperatorStep step;
    step.kind = OperatorKind::Crossover;
    step.seed = rng.next();
    step.donor_id = b.genome.id;
    step.donor_text = b.genome.text;

    Rng local(step.seed);
    auto text = mutation::crossover_text(a.genome.text, b.genome.text, local);
    if (!text) {
        AttackGenome clone = ranks_before(b, a) ? b.genome : a.genome;
        clone.id = std::move(new_id);
        return clone;
    }
    AttackGenome child = a.genome;
    child.id = std::move(new_id);
    child.text = std::move(*text);
    child.operator_history.push_back(std::move(step));
    child.seed = mutation::child_seed(a.genome.seed, b.genome.seed);
    child.generation = std::max(a.genome.generation, b.genome.generation) + 1;
    return child;
}

StepResult step(const Population& population, const GaParams& params, const FitnessWeights& weights,
                const Evaluator& evaluate, const mutation::MutationContext& ctx, Rng& rng, IdSource& ids) {
    StepResult out;
    Population current = population;
    current.capacity = params.population_size;

    // (1) score members that have never been evaluated, in id order.
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < current.members.size(); ++i)
        if (!current.members[i].evaluated) pending.push_back(i);
    std::sort(pending.begin(), pending.end(), [&](std::size_t x, std::size_t y) {
        return current.members[x].genome.id < current.members[y].genome.id;
    });
    for (auto i : pending) {
        auto& m = current.members[i];
        m.outcome = safe_evaluate(evaluate, m.genome);
        m.evaluated = !m.outcome.skipped;
        for (const auto& w : m.outcome.warnings) out.warnings.push_back(w);
    }
    const auto current_ptrs = pointers(current.members);
    for (auto i : pending) {
        auto& m = current.members[i];
        m.components = components_from(m.genome, m.embedding, current_ptrs, m.outcome);
        m.fitness = aggregate(m.components, weights);
        out.evaluated.push_back(m);
    }
    current.sort();

    // (2) adaptive selection pressure and mutation rate.
    out.stats.diversity = diversity(current);
    out.stats.tournament_size =
        adaptive_tournament_size(params.tournament_base, out.stats.diversity, current.stagnation, params.stagnation_window);
    out.stats.mutation_rate = adaptive_mutation_rate(params, out.stats.diversity, current.stagnation);

    Population next;
    next.capacity = params.population_size;
    next.generation = current.generation + 1;
    const std::size_t elites = std::min(params.elite_count, current.members.size());
    next.members.assign(current.members.begin(), current.members.begin() + static_cast<std::ptrdiff_t>(elites));

    // (3) offspring: two tournaments, crossover, mutation.
    std::vector<Member> offspring;
    if (!current.members.empty()) {
        while (next.members.size() + offspring.size() < params.population_size) {
            const Member& p1 = select(current, out.stats.tournament_size, rng);
            const Member& p2 = select(current, out.stats.tournament_size, rng);
            auto child = crossover(p1, p2, rng, ids.take());
            child = mutation::mutate(child, out.stats.mutation_rate, ctx, rng, ids.take());
            offspring.push_back(make_member(std::move(child)));
        }
    }

    // (4) evaluate offspring in id order (allocation order).
    for (auto& m : offspring) {
        m.outcome = safe_evaluate(evaluate, m.genome);
        m.evaluated = !m.outcome.skipped;
        for (const auto& w : m.outcome.warnings) out.warnings.push_back(w);
    }
    const std::size_t elite_end = next.members.size();
    for (auto& m : offspring) next.members.push_back(std::move(m));
    const auto next_ptrs = pointers(next.members);
    for (std::size_t i = elite_end; i < next.members.size(); ++i) {
        auto& m = next.members[i];
        m.components = components_from(m.genome, m.embedding, next_ptrs, m.outcome);
        m.fitness = aggregate(m.components, weights);
        out.evaluated.push_back(m);
    }
    next.sort();

    // (5) bookkeeping.
    out.stats.evaluated = out.evaluated.size();
    const double best_now = next.members.empty() ? 0.0 : next.members.front().fitness;
    if (best_now > current.best_fitness + 1e-12) {
        next.best_fitness = best_now;
        next.stagnation = 0;
    } else {
        next.best_fitness = std::max(current.best_fitness, best_now);
        next.stagnation = current.stagnation + 1;
    }
    for (const auto& m : out.evaluated)
        if (m.outcome.any_success()) out.discoveries.push_back(m);
    std::sort(out.discoveries.begin(), out.discoveries.end(),
              [](const Member& x, const Member& y) { return x.genome.id < y.genome.id; });
    out.population = std::move(next);
    return out;
}

std::string population_digest(const Population& population) {
    json rows = json::array();
    for (const auto& m : population.members) rows.push_back(json::array({m.genome.id, m.genome.text, m.fitness}));
    return sha256_hex(canonical_dump(rows));
}

void to_json(json& j, const FitnessWeights& w) {
    j = json{{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}, {"delta", w.delta}, {"epsilon", w.epsilon}};
}

void to_json(json& j, const FitnessComponents& c) {
    j = json{{"asr", c.asr}, {"sim", c.sim}, {"div", c.div}, {"trans", c.trans}, {"sever", c.sever}};
}

void to_json(json& j, const TargetResult& r) {
    j = json{{"target_id", r.target_id},
             {"success", r.success},
             {"score", r.score},
             {"unreachable", r.unreachable},
             {"rule_id", r.rule_id ? json(*r.rule_id) : json(nullptr)}};
}

void to_json(json& j, const Member& m) {
    j = json{{"genome", m.genome}, {"components", m.components}, {"fitness", m.fitness}};
}

}  // namespace redteam::evolve
