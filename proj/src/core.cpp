#include "redteam/core.hpp"

#include <cmath>
#include <stdexcept>

#include <openssl/evp.h>

#include "redteam/errors.hpp"
#include "redteam/textops.hpp"

namespace redteam {

std::string_view to_string(AttackCategory c) {
    switch (c) {
        case AttackCategory::PromptInjection: return "prompt_injection";
        case AttackCategory::SocialEngineering: return "social_engineering";
        case AttackCategory::Compositional: return "compositional";
        case AttackCategory::OptimizationBased: return "optimization_based";
        case AttackCategory::CrossLingual: return "cross_lingual";
    }
    return "unknown";
}

std::string_view to_string(SeverityClass s) {
    switch (s) {
        case SeverityClass::Critical: return "critical";
        case SeverityClass::High: return "high";
        case SeverityClass::Medium: return "medium";
        case SeverityClass::Low: return "low";
    }
    return "unknown";
}

std::string_view to_string(DomainTag d) {
    switch (d) {
        case DomainTag::Healthcare: return "healthcare";
        case DomainTag::Finance: return "finance";
        case DomainTag::Education: return "education";
        case DomainTag::General: return "general";
    }
    return "unknown";
}

std::string_view to_string(OperatorKind k) {
    switch (k) {
        case OperatorKind::SynonymReplace: return "synonym_replace";
        case OperatorKind::Paraphrase: return "paraphrase";
        case OperatorKind::NoiseInsert: return "noise_insert";
        case OperatorKind::Compose: return "compose";
        case OperatorKind::Crossover: return "crossover";
    }
    return "unknown";
}

AttackCategory parse_category(std::string_view name) {
    for (auto c : kAllCategories)
        if (to_string(c) == name) return c;
    throw std::invalid_argument("unknown attack category '" + std::string(name) + "'");
}

SeverityClass parse_severity(std::string_view name) {
    for (auto s : kAllSeverities)
        if (to_string(s) == name) return s;
    throw std::invalid_argument("unknown severity '" + std::string(name) + "'");
}

DomainTag parse_domain(std::string_view name) {
    for (auto d : {DomainTag::Healthcare, DomainTag::Finance, DomainTag::Education, DomainTag::General})
        if (to_string(d) == name) return d;
    throw std::invalid_argument("unknown domain '" + std::string(name) + "'");
}

OperatorKind parse_operator(std::string_view name) {
    for (auto k : {OperatorKind::SynonymReplace, OperatorKind::Paraphrase, OperatorKind::NoiseInsert,
                   OperatorKind::Compose, OperatorKind::Crossover})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown operator '" + std::string(name) + "'");
}

std::string IdSource::take() {
    std::string digits = std::to_string(next_++);
    if (digits.size() < 8) digits.insert(0, 8 - digits.size(), '0');
    return prefix_ + digits;
}

SeverityClass classify_severity(double vsi) {
    if (!std::isfinite(vsi) || vsi < 0.0 || vsi > 5.0)
        throw DomainError("vsi must be a finite value in [0, 5]");
    if (vsi >= 4.0) return SeverityClass::Critical;
    if (vsi >= 3.0) return SeverityClass::High;
    if (vsi >= 1.5) return SeverityClass::Medium;
    return SeverityClass::Low;
}

double complexity_score(const AttackGenome& genome) {
    bool composed = false;
    for (const auto& step : genome.operator_history)
        if (step.kind == OperatorKind::Compose) composed = true;
    return 1.0 * static_cast<double>(genome.operator_history.size()) +
           0.2 * static_cast<double>(textops::segment(genome.text).size()) + (composed ? 1.0 : 0.0);
}

void to_json(json& j, const OperatorStep& s) {
    j = json{{"op", to_string(s.kind)}, {"seed", s.seed}, {"rate", s.rate}};
    if (!s.donor_id.empty()) j["donor_id"] = s.donor_id;
    if (!s.donor_text.empty()) j["donor_text"] = s.donor_text;
}

void from_json(const json& j, OperatorStep& s) {
    s.kind = parse_operator(j.at("op").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.rate = j.at("rate").get<double>();
    s.donor_id = j.value("donor_id", std::string{});
    s.donor_text = j.value("donor_text", std::string{});
}

void to_json(json& j, const AttackGenome& g) {
    j = json{{"id", g.id},
             {"text", g.text},
             {"origin_text", g.origin_text},
             {"category", to_string(g.category)},
             {"domain", to_string(g.domain)},
             {"operator_history", g.operator_history},
             {"seed", g.seed},
             {"generation", g.generation}};
}

void from_json(const json& j, AttackGenome& g) {
    g.id = j.at("id").get<std::string>();
    g.text = j.at("text").get<std::string>();
    g.origin_text = j.at("origin_text").get<std::string>();
    g.category = parse_category(j.at("category").get<std::string>());
    g.domain = parse_domain(j.value("domain", std::string("general")));
    g.operator_history = j.at("operator_history").get<std::vector<OperatorStep>>();
    g.seed = j.at("seed").get<std::uint64_t>();
    g.generation = j.at("generation").get<std::uint32_t>();
}

void to_json(json& j, const Reproduction& r) {
    j = json{{"config_hash", r.config_hash},
             {"seed", r.seed},
             {"operator_history", r.operator_history},
             {"target_id", r.target_id}};
}

void from_json(const json& j, Reproduction& r) {
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.operator_history = j.at("operator_history").get<std::vector<OperatorStep>>();
    r.target_id = j.at("target_id").get<std::string>();
}

void to_json(json& j, const VulnerabilityRecord& r) {
    j = json{{"id", r.id},
             {"genome", r.genome},
             {"target_id", r.target_id},
             {"rule_id", r.rule_id ? json(*r.rule_id) : json(nullptr)},
             {"vsi", r.vsi},
             {"severity", to_string(r.severity)},
             {"exploitability", r.exploitability},
             {"impact", r.impact},
             {"mitigation_difficulty", r.mitigation_difficulty},
             {"domain_tag", to_string(r.domain_tag)},
             {"complexity", r.complexity},
             {"discovered_at", r.discovered_at},
             {"patched_at", r.patched_at ? json(*r.patched_at) : json(nullptr)},
             {"reproduction", r.reproduction}};
}

void from_json(const json& j, VulnerabilityRecord& r) {
    r.id = j.at("id").get<std::string>();
    r.genome = j.at("genome").get<AttackGenome>();
    r.target_id = j.at("target_id").get<std::string>();
    const auto& rule = j.at("rule_id");
    r.rule_id = rule.is_null() ? std::nullopt : std::optional<std::string>(rule.get<std::string>());
    r.vsi = j.at("vsi").get<double>();
    r.severity = parse_severity(j.at("severity").get<std::string>());
    r.exploitability = j.at("exploitability").get<double>();
    r.impact = j.at("impact").get<double>();
    r.mitigation_difficulty = j.at("mitigation_difficulty").get<double>();
    r.domain_tag = parse_domain(j.at("domain_tag").get<std::string>());
    r.complexity = j.at("complexity").get<double>();
    r.discovered_at = j.at("discovered_at").get<std::uint32_t>();
    const auto& patched = j.at("patched_at");
    r.patched_at = patched.is_null() ? std::nullopt : std::optional<std::uint32_t>(patched.get<std::uint32_t>());
    r.reproduction = j.at("reproduction").get<Reproduction>();
}

std::string canonical_dump(const json& j) {
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0F]);
    }
    return out;
}

}  // namespace redteam
