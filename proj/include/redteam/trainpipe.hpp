#pragma once

// Training-side mathematics and dataset export: the weighted training-loss
// combiner, competence-based curriculum, cosine annealing with warm restarts,
// weight EMA, the EWC penalty with adaptive strength, synthetic negatives and
// the tiered curriculum dataset.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "redteam/core.hpp"
#include "redteam/rng.hpp"

namespace redteam::trainpipe {

// Deliberately no defaults: callers must choose every weight.
struct LossWeights {
    double l1;
    double l2;
    double l3;
    double l4;
    double l5;
};

struct LossComponents {
    double standard = 0.0;
    double adversarial = 0.0;
    double regularization = 0.0;
    double alignment = 0.0;
    double utility = 0.0;
};

/// Fixed-order weighted sum; throws NumericError on a non-finite result.
double combine_losses(const LossComponents& c, const LossWeights& w);

struct CurriculumParams {
    double c0 = 0.1;
    std::uint64_t total_steps = 1000;
};

/// min(1, sqrt((t/T)(1 - c0^2) + c0^2)). Throws DomainError for T = 0 or c0 outside (0,1].
double competence(std::uint64_t t, const CurriculumParams& params);

struct LrSchedule {
    double eta_min = 0.0;
    double eta_max = 1e-3;
    std::uint64_t t_i = 100;
    double mult = 1.0;
};

/// Throws DomainError when the schedule violates its invariants.
void validate(const LrSchedule& s);

/// eta_min + (eta_max - eta_min) * (1 + cos(pi * t_cur / t_len)) / 2.
double cosine_anneal(double eta_min, double eta_max, std::uint64_t t_cur, std::uint64_t t_len);

/// Learning rate at step t; each restart begins a cycle mult times longer.
double lr_at(const LrSchedule& s, std::uint64_t t);

/// decay * avg + (1 - decay) * current. Throws ShapeError / DomainError.
std::vector<double> ema_update(const std::vector<double>& avg, const std::vector<double>& current, double decay);

struct EwcState {
    std::vector<double> fisher;
    std::vector<double> anchor;
    double lam = 1.0;
    double lam0 = 1.0;
    double kappa = 10.0;
};

struct EwcResult {
    double penalty = 0.0;
    std::vector<double> gradient;
};

/// (lam/2) sum F_i (theta_i - anchor_i)^2 and its gradient. Throws ShapeError.
EwcResult ewc_penalty(const std::vector<double>& theta, const EwcState& state);

/// lam0 * (1 + kappa * max(0, forgetting)).
double adapt_lambda(const EwcState& state, double forgetting);

enum class ExampleLabel { Adversarial, Benign };

struct DatasetExample {
    std::string prompt;
    ExampleLabel label = ExampleLabel::Benign;
    // Adversarial examples only.
    std::string record_id;
    std::optional<SeverityClass> severity;
    std::optional<AttackCategory> category;
    std::uint32_t tier = 0;
    double complexity = 0.0;

    friend bool operator==(const DatasetExample&, const DatasetExample&) = default;
};

void to_json(json& j, const DatasetExample& e);
void from_json(const json& j, DatasetExample& e);

/// round(ratio * |records|) benign lines, each noised at intensity 0.1, tier 0.
/// Throws PreconditionError on an empty corpus or non-positive ratio (0 yields none).
std::vector<DatasetExample> synth_negatives(const std::vector<VulnerabilityRecord>& records,
                                            const std::vector<std::string>& benign, double ratio, Rng& rng);

/// Tier sizes for n items over `tiers` tiers: near-equal, remainder to the earliest tiers.
std::vector<std::size_t> tier_sizes(std::size_t n, std::size_t tiers);

/// Records sorted by complexity (ties by id) and split into contiguous tiers.
/// Throws PreconditionError for no records or zero tiers.
std::vector<DatasetExample> curriculum_plan(const std::vector<VulnerabilityRecord>& records, std::size_t tiers);

/// Whether the example at sorted position `rank` (0-based, of n) is released at step t:
/// (rank + 1) / n <= competence(t).
bool released(std::size_t rank, std::size_t n, std::uint64_t t, const CurriculumParams& params);

/// Writes tier_<k>.jsonl for every tier plus manifest.json; returns the
/// manifest. Throws ExportError and removes partial output on failure.
json export_dataset(const std::vector<DatasetExample>& plan, const std::vector<DatasetExample>& negatives,
                    std::size_t tiers, const std::string& config_hash, const std::filesystem::path& out_dir);

}  // namespace redteam::trainpipe
