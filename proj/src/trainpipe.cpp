#include "redteam/trainpipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "redteam/campaign.hpp"
#include "redteam/errors.hpp"
#include "redteam/mutation.hpp"
#include "redteam/textops.hpp"

namespace redteam::trainpipe {
namespace fs = std::filesystem;

namespace {

constexpr double kNegativeNoise = 0.1;

std::string_view label_name(ExampleLabel l) { return l == ExampleLabel::Adversarial ? "adversarial" : "benign"; }

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + " is not finite");
}

}  // namespace

double combine_losses(const LossComponents& c, const LossWeights& w) {
    double total = w.l1 * c.standard;
    total += w.l2 * c.adversarial;
    total += w.l3 * c.regularization;
    total += w.l4 * c.alignment;
    total += w.l5 * c.utility;
    require_finite(total, "combined loss");
    return total;
}

double competence(std::uint64_t t, const CurriculumParams& params) {
    if (params.total_steps == 0) throw DomainError("curriculum total_steps must be positive");
    if (!(params.c0 > 0.0 && params.c0 <= 1.0)) throw DomainError("curriculum c0 must lie in (0, 1]");
    if (t >= params.total_steps) return 1.0;
    const double c0_sq = params.c0 * params.c0;
    const double frac = static_cast<double>(t) / static_cast<double>(params.total_steps);
    return std::min(1.0, std::sqrt(frac * (1.0 - c0_sq) + c0_sq));
}

void validate(const LrSchedule& s) {
    if (!(s.eta_min >= 0.0) || !(s.eta_min < s.eta_max) || !std::isfinite(s.eta_max))
        throw DomainError("learning-rate schedule needs 0 <= eta_min < eta_max");
    if (s.t_i == 0) throw DomainError("learning-rate cycle length must be positive");
    if (!(s.mult >= 1.0) || !std::isfinite(s.mult)) throw DomainError("learning-rate cycle growth must be >= 1");
}

double cosine_anneal(double eta_min, double eta_max, std::uint64_t t_cur, std::uint64_t t_len) {
    const double phase = std::numbers::pi * static_cast<double>(t_cur) / static_cast<double>(t_len);
    return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + std::cos(phase));
}

double lr_at(const LrSchedule& s, std::uint64_t t) {
    validate(s);
    // A cycle of length L covers the L + 1 steps offset..offset+L so that both
    // its first (eta_max) and last (eta_min) step are reachable.
    if (s.mult == 1.0) {
        const std::uint64_t span = s.t_i + 1;
        return cosine_anneal(s.eta_min, s.eta_max, t % span, s.t_i);
    }
    double nominal = static_cast<double>(s.t_i);
    std::uint64_t offset = 0;
    for (;;) {
        const auto len = static_cast<std::uint64_t>(std::max(1.0, std::round(nominal)));
        if (t - offset <= len) return cosine_anneal(s.eta_min, s.eta_max, t - offset, len);
        offset += len + 1;
        nominal *= s.mult;
    }
}

std::vector<double> ema_update(const std::vector<double>& avg, const std::vector<double>& current, double decay) {
    if (avg.size() != current.size()) throw ShapeError("ema_update: length mismatch");
    if (!(decay >= 0.0 && decay <= 1.0)) throw DomainError("ema decay must lie in [0, 1]");
    std::vector<double> out(avg.size());
    for (std::size_t i = 0; i < avg.size(); ++i) out[i] = decay * avg[i] + (1.0 - decay) * current[i];
    return out;
}

EwcResult ewc_penalty(const std::vector<double>& theta, const EwcState& state) {
    if (state.fisher.size() != state.anchor.size() || theta.size() != state.anchor.size())
        throw ShapeError("ewc_penalty: theta, fisher and anchor lengths differ");
    EwcResult r;
    r.gradient.resize(theta.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double d = theta[i] - state.anchor[i];
        sum += state.fisher[i] * d * d;
        r.gradient[i] = state.lam * state.fisher[i] * d;
    }
    r.penalty = 0.5 * state.lam * sum;
    return r;
}

double adapt_lambda(const EwcState& state, double forgetting) {
    require_finite(forgetting, "forgetting");
    return state.lam0 * (1.0 + state.kappa * std::max(0.0, forgetting));
}

void to_json(json& j, const DatasetExample& e) {
    j = json{{"prompt", e.prompt},
             {"label", label_name(e.label)},
             {"record_id", e.label == ExampleLabel::Adversarial ? json(e.record_id) : json(nullptr)},
             {"severity", e.severity ? json(to_string(*e.severity)) : json(nullptr)},
             {"category", e.category ? json(to_string(*e.category)) : json(nullptr)},
             {"tier", e.tier},
             {"complexity", e.complexity}};
}

void from_json(const json& j, DatasetExample& e) {
    e.prompt = j.at("prompt").get<std::string>();
    const auto label = j.at("label").get<std::string>();
    if (label == "adversarial") e.label = ExampleLabel::Adversarial;
    else if (label == "benign") e.label = ExampleLabel::Benign;
    else throw std::invalid_argument("unknown label: " + label);
    e.record_id = j.at("record_id").is_null() ? std::string() : j.at("record_id").get<std::string>();
    e.severity = j.at("severity").is_null() ? std::nullopt
                                            : std::optional(parse_severity(j.at("severity").get<std::string>()));
    e.category = j.at("category").is_null() ? std::nullopt
                                            : std::optional(parse_category(j.at("category").get<std::string>()));
    e.tier = j.at("tier").get<std::uint32_t>();
    e.complexity = j.at("complexity").get<double>();
}

std::vector<DatasetExample> synth_negatives(const std::vector<VulnerabilityRecord>& records,
                                            const std::vector<std::string>& benign, double ratio, Rng& rng) {
    if (!(ratio >= 0.0) || !std::isfinite(ratio)) throw PreconditionError("negatives ratio must be >= 0");
    const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(records.size())));
    if (count == 0) return {};
    if (benign.empty()) throw PreconditionError("benign corpus is empty");
    std::vector<DatasetExample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        DatasetExample e;
        e.prompt = mutation::noise_insert(benign[rng.below(benign.size())], kNegativeNoise, rng);
        e.label = ExampleLabel::Benign;
        e.tier = 0;
        AttackGenome g;
        g.text = e.prompt;
        e.complexity = complexity_score(g);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<std::size_t> tier_sizes(std::size_t n, std::size_t tiers) {
    if (tiers == 0) throw PreconditionError("at least one tier is required");
    std::vector<std::size_t> sizes(tiers, n / tiers);
    for (std::size_t k = 0; k < n % tiers; ++k) ++sizes[k];
    return sizes;
}

std::vector<DatasetExample> curriculum_plan(const std::vector<VulnerabilityRecord>& records, std::size_t tiers) {
    if (records.empty()) throw PreconditionError("curriculum needs at least one record");
    std::vector<const VulnerabilityRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        const double ca = complexity_score(a->genome);
        const double cb = complexity_score(b->genome);
        if (ca != cb) return ca < cb;
        return a->id < b->id;
    });
    const auto sizes = tier_sizes(sorted.size(), tiers);
    std::vector<DatasetExample> plan;
    std::size_t index = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k)
        for (std::size_t i = 0; i < sizes[k]; ++i, ++index) {
            const auto& r = *sorted[index];
            DatasetExample e;
            e.prompt = r.genome.text;
            e.label = ExampleLabel::Adversarial;
            e.record_id = r.id;
            e.severity = r.severity;
            e.category = r.genome.category;
            e.tier = static_cast<std::uint32_t>(k);
            e.complexity = complexity_score(r.genome);
            plan.push_back(std::move(e));
        }
    return plan;
}

bool released(std::size_t rank, std::size_t n, std::uint64_t t, const CurriculumParams& params) {
    if (n == 0 || rank >= n) return false;
    return static_cast<double>(rank + 1) / static_cast<double>(n) <= competence(t, params);
}

json export_dataset(const std::vector<DatasetExample>& plan, const std::vector<DatasetExample>& negatives,
                    std::size_t tiers, const std::string& config_hash, const fs::path& out_dir) {
    if (tiers == 0) throw ExportError("at least one tier is required");
    std::vector<fs::path> written;
    try {
        fs::create_directories(out_dir);
        campaign::DirectoryLock lock(out_dir);
        for (const auto& entry : fs::directory_iterator(out_dir)) {
            const auto name = entry.path().filename().string();
            if (name.rfind("tier_", 0) == 0 && entry.path().extension() == ".jsonl") fs::remove(entry.path());
        }

        std::vector<std::vector<const DatasetExample*>> by_tier(tiers);
        for (const auto& e : negatives) by_tier.at(e.tier).push_back(&e);
        for (const auto& e : plan) by_tier.at(e.tier).push_back(&e);

        json tier_rows = json::array();
        std::map<std::string, std::size_t> severity;
        std::map<std::string, std::size_t> category;
        std::size_t adversarial = 0;
        std::size_t benign = 0;
        for (std::size_t k = 0; k < tiers; ++k) {
            const auto path = out_dir / ("tier_" + std::to_string(k) + ".jsonl");
            written.push_back(path);
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            std::size_t adv_k = 0;
            std::size_t ben_k = 0;
            for (const auto* e : by_tier[k]) {
                out << canonical_dump(*e) << '\n';
                if (e->label == ExampleLabel::Adversarial) {
                    ++adv_k;
                    if (e->severity) ++severity[std::string(to_string(*e->severity))];
                    if (e->category) ++category[std::string(to_string(*e->category))];
                } else {
                    ++ben_k;
                }
            }
            if (!out.flush()) throw ExportError("write to " + path.string() + " failed");
            adversarial += adv_k;
            benign += ben_k;
            tier_rows.push_back(json{{"tier", k},
                                     {"file", path.filename().string()},
                                     {"count", adv_k + ben_k},
                                     {"adversarial", adv_k},
                                     {"benign", ben_k}});
        }
        json manifest{{"config_hash", config_hash},
                      {"tiers", tier_rows},
                      {"labels", {{"adversarial", adversarial}, {"benign", benign}}},
                      {"severity", severity},
                      {"category", category},
                      {"total", adversarial + benign}};
        const auto manifest_path = out_dir / "manifest.json";
        written.push_back(manifest_path);
        std::ofstream mout(manifest_path, std::ios::binary | std::ios::trunc);
        mout << manifest.dump(2) << '\n';
        if (!mout.flush()) throw ExportError("write to " + manifest_path.string() + " failed");
        return manifest;
    } catch (const ExportError&) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        throw;
    } catch (const std::exception& e) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        throw ExportError(e.what());
    }
}

}  // namespace redteam::trainpipe
