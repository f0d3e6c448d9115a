#include "redteam/mutation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "redteam/errors.hpp"
#include "redteam/textops.hpp"

namespace redteam::mutation {
namespace {

constexpr std::uint64_t kLineageConstant = 0xA5A5'5A5A'C3C3'3C3CULL;
constexpr std::uint64_t kDonorConstant = 0x0F0F'F0F0'1E1E'E1E1ULL;

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_edge_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && !std::isalnum(u) && !is_ascii_space(c);
}

std::string trim(std::string_view s) {
    while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
    return std::string(s);
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?' || c == '\n'; }

// a1, b2, a3, ... with the other parent filling positions the preferred one lacks.
std::vector<std::string> alternate(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::string> out;
    const std::size_t n = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& preferred = (i % 2 == 0) ? a : b;
        const auto& other = (i % 2 == 0) ? b : a;
        out.push_back(i < preferred.size() ? preferred[i] : other[i]);
    }
    return out;
}

}  // namespace

Lexicon Lexicon::parse(std::string_view contents) {
    Lexicon lex;
    std::istringstream in{std::string(contents)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto trimmed = trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        const auto colon = trimmed.find(':');
        if (colon == std::string::npos)
            throw ValidationError("lexicon_path", "line " + std::to_string(lineno) + " has no ':'");
        std::vector<std::string> synonyms;
        std::istringstream rest(trimmed.substr(colon + 1));
        std::string syn;
        while (std::getline(rest, syn, ',')) {
            auto s = trim(syn);
            if (!s.empty()) synonyms.push_back(std::move(s));
        }
        if (synonyms.empty())
            throw ValidationError("lexicon_path", "line " + std::to_string(lineno) + " lists no synonyms");
        lex.add(trimmed.substr(0, colon), std::move(synonyms));
    }
    return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read lexicon " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void Lexicon::add(std::string_view token, std::vector<std::string> synonyms) {
    auto key = textops::canonicalize(token);
    if (key.empty() || synonyms.empty()) return;
    auto& slot = entries_[key];
    for (auto& s : synonyms) slot.push_back(std::move(s));
}

const std::vector<std::string>* Lexicon::find(std::string_view token) const {
    auto it = entries_.find(textops::canonicalize(token));
    return it == entries_.end() ? nullptr : &it->second;
}

const std::vector<ParaphraseRule>& paraphrase_rules() {
    // No replacement starts with any pattern, so a rewritten text never
    // matches again.
    static const std::vector<ParaphraseRule> rules = {
        {"can you ", "i would like you to "},
        {"could you ", "would you kindly "},
        {"please ", "i kindly ask that you "},
        {"tell me ", "share with me "},
        {"show me ", "walk me through "},
        {"give me ", "provide me with "},
        {"how do i ", "in what way do i "},
        {"how can i ", "what steps let me "},
        {"what is ", "explain "},
        {"i need ", "it is essential that i get "},
        {"i want you to ", "your task is to "},
        {"pretend ", "imagine that "},
        {"you are ", "assume you are "},
        {"act as ", "take on the role of "},
        {"write ", "compose "},
        {"list ", "enumerate "},
        {"ignore ", "set aside "},
    };
    return rules;
}

std::string synonym_replace(std::string_view text, const Lexicon& lexicon, double rate, Rng& rng) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (is_ascii_space(text[i])) {
            out.push_back(text[i++]);
            continue;
        }
        std::size_t end = i;
        while (end < text.size() && !is_ascii_space(text[end])) ++end;
        const std::string_view token = text.substr(i, end - i);
        i = end;

        const double u = rng.uniform();
        const auto* synonyms = (u < rate) ? lexicon.find(token) : nullptr;
        if (synonyms == nullptr) {
            out += token;
            continue;
        }
        const auto& choice = (*synonyms)[rng.below(synonyms->size())];
        std::size_t lead = 0;
        while (lead < token.size() && is_edge_punct(token[lead])) ++lead;
        std::size_t tail = token.size();
        while (tail > lead && is_edge_punct(token[tail - 1])) --tail;
        out += token.substr(0, lead);
        out += choice;
        out += token.substr(tail);
    }
    return out;
}

std::string paraphrase(std::string_view text, Rng& /*rng*/) {
    // Rewrite the first non-empty segment in canonical form and keep the rest
    // of the text verbatim, so segment structure survives the rewrite.
    std::size_t start = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        if (pos == text.size() || is_terminator(text[pos])) {
            const auto piece = text.substr(start, pos - start);
            const auto canon = textops::canonicalize(piece);
            if (!trim(piece).empty()) {
                if (canon.empty()) return std::string(text);
                for (const auto& rule : paraphrase_rules()) {
                    if (canon.starts_with(rule.pattern)) {
                        std::string out(text.substr(0, start));
                        out += rule.replacement;
                        out += canon.substr(rule.pattern.size());
                        out += text.substr(pos);
                        return out;
                    }
                }
                return std::string(text);
            }
            start = pos + 1;
        }
        ++pos;
    }
    return std::string(text);
}

std::size_t noise_edit_count(std::string_view text, double intensity) {
    const auto len = textops::decode_utf8(text).size();
    const double budget = intensity * static_cast<double>(std::max<std::size_t>(1, len)) / 20.0;
    return static_cast<std::size_t>(std::ceil(budget));
}

std::string noise_insert(std::string_view text, double intensity, Rng& rng) {
    static constexpr char32_t kInsertable[] = {U'-', U'_', U'.'};
    const std::size_t edits = noise_edit_count(text, intensity);
    auto cps = textops::decode_utf8(text);
    for (std::size_t e = 0; e < edits; ++e) {
        const std::size_t n = cps.size();
        switch (rng.below(4)) {
            case 0:  // swap adjacent
                if (n >= 2) {
                    const auto p = rng.below(n - 1);
                    std::swap(cps[p], cps[p + 1]);
                }
                break;
            case 1:  // duplicate
                if (n >= 1) {
                    const auto p = rng.below(n);
                    cps.insert(cps.begin() + static_cast<std::ptrdiff_t>(p), cps[p]);
                }
                break;
            case 2: {  // insert separator
                const auto p = rng.below(n + 1);
                const auto c = kInsertable[rng.below(3)];
                cps.insert(cps.begin() + static_cast<std::ptrdiff_t>(p), c);
                break;
            }
            default: {  // flip case
                std::vector<std::size_t> letters;
                for (std::size_t i = 0; i < n; ++i)
                    if ((cps[i] >= U'a' && cps[i] <= U'z') || (cps[i] >= U'A' && cps[i] <= U'Z')) letters.push_back(i);
                if (!letters.empty()) {
                    const auto p = letters[rng.below(letters.size())];
                    cps[p] ^= 0x20;
                }
                break;
            }
        }
    }
    return textops::encode_utf8(cps);
}

std::string compose(std::string_view a, std::string_view b, Rng& rng) {
    switch (rng.below(3)) {
        case 0:
            return std::string(a) + " " + std::string(b);
        case 1: {
            const auto sa = textops::segment(a);
            const auto sb = textops::segment(b);
            std::vector<std::string> parts;
            for (std::size_t i = 0; i < std::max(sa.size(), sb.size()); ++i) {
                if (i < sa.size()) parts.push_back(sa[i]);
                if (i < sb.size()) parts.push_back(sb[i]);
            }
            if (parts.empty()) return std::string(a) + " " + std::string(b);
            return join(parts, ". ");
        }
        default: {
            const auto sa = textops::segment(a);
            const std::string first = sa.empty() ? trim(a) : sa.front();
            const std::string last = sa.empty() ? trim(a) : sa.back();
            return first + " " + std::string(b) + " " + last;
        }
    }
}

std::optional<std::string> crossover_text(std::string_view a, std::string_view b, Rng& rng) {
    const auto sa = textops::segment(a);
    const auto sb = textops::segment(b);

    auto first = alternate(sa, sb);
    auto text = join(first, ". ");
    if (!text.empty() && textops::coherence(text) >= 0.5) return text;

    text = join(alternate(sb, sa), ". ");
    if (!text.empty() && textops::coherence(text) >= 0.5) return text;

    for (std::size_t i = first.size(); i > 1; --i) std::swap(first[i - 1], first[rng.below(i)]);
    text = join(first, ". ");
    if (!text.empty() && textops::coherence(text) >= 0.5) return text;
    return std::nullopt;
}

std::uint64_t child_seed(std::uint64_t parent_seed) noexcept { return splitmix64(parent_seed ^ kLineageConstant); }

std::uint64_t child_seed(std::uint64_t parent_seed, std::uint64_t donor_seed) noexcept {
    return splitmix64(parent_seed ^ splitmix64(donor_seed ^ kDonorConstant));
}

AttackGenome compose_genome(const AttackGenome& a, const AttackGenome& b, Rng& rng, std::string new_id) {
    OperatorStep step;
    step.kind = OperatorKind::Compose;
    step.seed = rng.next();
    step.donor_id = b.id;
    step.donor_text = b.text;

    AttackGenome child = a;
    child.id = std::move(new_id);
    Rng local(step.seed);
    child.text = compose(a.text, b.text, local);
    child.operator_history.push_back(std::move(step));
    child.seed = child_seed(a.seed, b.seed);
    child.generation = std::max(a.generation, b.generation) + 1;
    return child;
}

namespace {

std::string apply_single_parent(std::string_view text, OperatorKind kind, double rate, const MutationContext& ctx,
                                Rng& local) {
    switch (kind) {
        case OperatorKind::SynonymReplace: {
            static const Lexicon kEmpty;
            return synonym_replace(text, ctx.lexicon ? *ctx.lexicon : kEmpty, rate, local);
        }
        case OperatorKind::Paraphrase:
            if (ctx.rewriter) {
                if (auto rewritten = ctx.rewriter(text); rewritten && !rewritten->empty()) return *rewritten;
                if (ctx.warnings) ctx.warnings->emplace_back("remote paraphraser unavailable; used rule table");
            }
            return paraphrase(text, local);
        case OperatorKind::NoiseInsert:
            return noise_insert(text, rate, local);
        default:
            throw PreconditionError("not a single-parent operator");
    }
}

constexpr OperatorKind kMutateKinds[] = {OperatorKind::SynonymReplace, OperatorKind::Paraphrase,
                                         OperatorKind::NoiseInsert};

}  // namespace

AttackGenome mutate(const AttackGenome& genome, double rate, const MutationContext& ctx, Rng& rng,
                    std::string new_id) {
    OperatorStep step;
    step.seed = rng.next();
    step.rate = rate;
    Rng local(step.seed);
    step.kind = kMutateKinds[local.below(3)];

    AttackGenome child = genome;
    child.id = std::move(new_id);
    child.text = apply_single_parent(genome.text, step.kind, rate, ctx, local);
    child.operator_history.push_back(step);
    child.seed = child_seed(genome.seed);
    child.generation = genome.generation + 1;
    return child;
}

std::string apply_step(std::string_view text, const OperatorStep& step, const MutationContext& ctx) {
    Rng local(step.seed);
    switch (step.kind) {
        case OperatorKind::Compose:
            return compose(text, step.donor_text, local);
        case OperatorKind::Crossover: {
            auto out = crossover_text(text, step.donor_text, local);
            if (!out) throw PreconditionError("recorded crossover step does not replay");
            return *out;
        }
        default: {
            const auto kind = kMutateKinds[local.below(3)];
            if (kind != step.kind) throw PreconditionError("recorded operator does not match its seed");
            return apply_single_parent(text, kind, step.rate, ctx, local);
        }
    }
}

std::string replay(std::string_view origin_text, const std::vector<OperatorStep>& history,
                   const MutationContext& ctx) {
    std::string text(origin_text);
    for (const auto& step : history) text = apply_step(text, step, ctx);
    return text;
}

}  // namespace redteam::mutation
