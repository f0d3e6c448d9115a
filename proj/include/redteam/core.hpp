#pragma once

// Domain types shared by every module: attack taxonomy, severity classes,
// genomes with their replayable lineage, and vulnerability records.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace redteam {

using json = nlohmann::json;

enum class AttackCategory {
    PromptInjection,
    SocialEngineering,
    Compositional,
    OptimizationBased,
    CrossLingual,
};

inline constexpr std::array<AttackCategory, 5> kAllCategories = {
    AttackCategory::PromptInjection, AttackCategory::SocialEngineering, AttackCategory::Compositional,
    AttackCategory::OptimizationBased, AttackCategory::CrossLingual,
};

// Declared low-to-high so the enum's natural order is the severity order.
enum class SeverityClass { Low = 0, Medium = 1, High = 2, Critical = 3 };

inline constexpr std::array<SeverityClass, 4> kAllSeverities = {
    SeverityClass::Critical, SeverityClass::High, SeverityClass::Medium, SeverityClass::Low,
};

enum class DomainTag { Healthcare, Finance, Education, General };

enum class OperatorKind { SynonymReplace, Paraphrase, NoiseInsert, Compose, Crossover };

std::string_view to_string(AttackCategory c);
std::string_view to_string(SeverityClass s);
std::string_view to_string(DomainTag d);
std::string_view to_string(OperatorKind k);

// Parsers throw std::invalid_argument on unknown names.
AttackCategory parse_category(std::string_view name);
SeverityClass parse_severity(std::string_view name);
DomainTag parse_domain(std::string_view name);
OperatorKind parse_operator(std::string_view name);

/// One applied operator plus everything needed to replay it: the seed of the
/// generator that drove it, the mutation rate in force, and for two-parent
/// operators the donor parent's text at the time.
struct OperatorStep {
    OperatorKind kind = OperatorKind::SynonymReplace;
    std::uint64_t seed = 0;
    double rate = 0.0;
    std::string donor_id;
    std::string donor_text;

    friend bool operator==(const OperatorStep&, const OperatorStep&) = default;
};

struct AttackGenome {
    std::string id;
    std::string text;
    std::string origin_text;
    AttackCategory category = AttackCategory::PromptInjection;
    DomainTag domain = DomainTag::General;
    std::vector<OperatorStep> operator_history;
    std::uint64_t seed = 0;
    std::uint32_t generation = 0;

    friend bool operator==(const AttackGenome&, const AttackGenome&) = default;
};

struct Reproduction {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<OperatorStep> operator_history;
    std::string target_id;

    friend bool operator==(const Reproduction&, const Reproduction&) = default;
};

struct VulnerabilityRecord {
    std::string id;
    AttackGenome genome;
    std::string target_id;
    std::optional<std::string> rule_id;
    double vsi = 0.0;
    SeverityClass severity = SeverityClass::Low;
    double exploitability = 0.0;
    double impact = 0.0;
    double mitigation_difficulty = 0.0;
    DomainTag domain_tag = DomainTag::General;
    double complexity = 0.0;
    std::uint32_t discovered_at = 0;
    std::optional<std::uint32_t> patched_at;
    Reproduction reproduction;

    friend bool operator==(const VulnerabilityRecord&, const VulnerabilityRecord&) = default;
};

/// Monotone identifier source: prefix followed by a zero-padded counter, so
/// lexicographic order equals allocation order.
class IdSource {
public:
    explicit IdSource(std::string prefix, std::uint64_t next = 0) : prefix_(std::move(prefix)), next_(next) {}

    std::string take();
    [[nodiscard]] std::uint64_t peek() const noexcept { return next_; }

private:
    std::string prefix_;
    std::uint64_t next_;
};

/// Critical if vsi >= 4.0, High if >= 3.0, Medium if >= 1.5, otherwise Low.
/// Throws DomainError for non-finite or out-of-range input.
SeverityClass classify_severity(double vsi);

/// 1.0 per applied operator + 0.2 per text segment + 1.0 if any step is Compose.
double complexity_score(const AttackGenome& genome);

void to_json(json& j, const OperatorStep& s);
void from_json(const json& j, OperatorStep& s);
void to_json(json& j, const AttackGenome& g);
void from_json(const json& j, AttackGenome& g);
void to_json(json& j, const Reproduction& r);
void from_json(const json& j, Reproduction& r);
void to_json(json& j, const VulnerabilityRecord& r);
void from_json(const json& j, VulnerabilityRecord& r);

/// Compact, sorted-key UTF-8 serialization used for every hash in the system.
std::string canonical_dump(const json& j);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace redteam
