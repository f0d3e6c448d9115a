#include "redteam/textops.hpp"

#include <algorithm>
#include <cmath>

namespace redteam::textops {
namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

// Unicode general category P over ASCII, Latin-1, General Punctuation, CJK
// Symbols and Punctuation, and the fullwidth forms. Other blocks pass through.
bool is_punctuation(char32_t cp) {
    if (cp < 0x80) {
        switch (cp) {
            case '!': case '"': case '#': case '%': case '&': case '\'': case '(': case ')':
            case '*': case ',': case '-': case '.': case '/': case ':': case ';': case '?':
            case '@': case '[': case '\\': case ']': case '_': case '{': case '}':
                return true;
            default:
                return false;
        }
    }
    switch (cp) {
        case 0x00A1: case 0x00A7: case 0x00AB: case 0x00B6: case 0x00B7: case 0x00BB: case 0x00BF:
        case 0x037E: case 0x0387: case 0x055C: case 0x055D: case 0x055E: case 0x0589:
        case 0x060C: case 0x061B: case 0x061F: case 0x06D4: case 0x0964: case 0x0965:
        case 0x3030: case 0x303D: case 0x30A0: case 0x30FB:
        case 0xFF3F: case 0xFF5B: case 0xFF5D:
            return true;
        default:
            break;
    }
    return in(cp, 0x2010, 0x2027) || in(cp, 0x2030, 0x2043) || in(cp, 0x2045, 0x2051) ||
           in(cp, 0x2053, 0x205E) || in(cp, 0x2E00, 0x2E4F) || in(cp, 0x3001, 0x3003) ||
           in(cp, 0x3008, 0x3011) || in(cp, 0x3014, 0x301F) || in(cp, 0xFF01, 0xFF03) ||
           in(cp, 0xFF05, 0xFF0A) || in(cp, 0xFF0C, 0xFF0F) || in(cp, 0xFF1A, 0xFF1B) ||
           in(cp, 0xFF1F, 0xFF20) || in(cp, 0xFF3B, 0xFF3D) || in(cp, 0xFF5F, 0xFF65);
}

bool is_space(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' ||
           cp == 0x85 || cp == 0xA0 || cp == 0x1680 || in(cp, 0x2000, 0x200A) || cp == 0x2028 ||
           cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

bool is_alpha(char32_t cp) {
    if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    if (cp == 0xD7 || cp == 0xF7) return false;
    return in(cp, 0xC0, 0x24F) || in(cp, 0x370, 0x3FF) || in(cp, 0x400, 0x4FF) ||
           in(cp, 0x620, 0x64A) || in(cp, 0x3040, 0x30FF) || in(cp, 0x4E00, 0x9FFF) ||
           in(cp, 0xAC00, 0xD7A3);
}

char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp < 0x80) return cp;
    if (in(cp, 0xC0, 0xDE) && cp != 0xD7) return cp + 0x20;
    if (in(cp, 0x391, 0x3AB) && cp != 0x3A2) return cp + 0x20;
    if (in(cp, 0x410, 0x42F)) return cp + 0x20;
    if (in(cp, 0x400, 0x40F)) return cp + 0x50;
    return cp;
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?' || c == '\n'; }

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::string_view trim_ascii(std::string_view s) {
    while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
    return s;
}

}  // namespace

bool FeatureVector::is_zero() const noexcept {
    return std::all_of(components.begin(), components.end(), [](double v) { return v == 0.0; });
}

std::vector<char32_t> decode_utf8(std::string_view text) {
    std::vector<char32_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto b0 = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        if (i + len > text.size()) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool ok = true;
        for (std::size_t k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(text[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
        if (!ok || overlong || cp > 0x10FFFF || in(cp, 0xD800, 0xDFFF)) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string encode_utf8(const std::vector<char32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) append_utf8(out, cp);
    return out;
}

std::string canonicalize(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char32_t cp : decode_utf8(text)) {
        if (is_space(cp)) {
            pending_space = !out.empty();
            continue;
        }
        if (is_punctuation(cp)) continue;
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        append_utf8(out, to_lower(cp));
    }
    return out;
}

std::vector<std::string> canonical_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    const std::string canon = canonicalize(text);
    std::size_t start = 0;
    while (start < canon.size()) {
        std::size_t end = canon.find(' ', start);
        if (end == std::string::npos) end = canon.size();
        tokens.emplace_back(canon.substr(start, end - start));
        start = end + 1;
    }
    return tokens;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::array<std::uint32_t, kEmbeddingDim> trigram_counts(std::string_view text) {
    std::array<std::uint32_t, kEmbeddingDim> counts{};
    const auto cps = decode_utf8(canonicalize(text));
    if (cps.size() < 3) return counts;
    std::string gram;
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
        gram.clear();
        append_utf8(gram, cps[i]);
        append_utf8(gram, cps[i + 1]);
        append_utf8(gram, cps[i + 2]);
        ++counts[fnv1a64(gram) % kEmbeddingDim];
    }
    return counts;
}

}  // namespace

FeatureVector embed(std::string_view text) {
    FeatureVector v;
    const auto counts = trigram_counts(text);
    double norm2 = 0.0;
    for (auto c : counts) norm2 += static_cast<double>(c) * static_cast<double>(c);
    if (norm2 == 0.0) return v;
    const double norm = std::sqrt(norm2);
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) v.components[i] = static_cast<double>(counts[i]) / norm;
    return v;
}

double cosine(const FeatureVector& a, const FeatureVector& b) noexcept {
    if (a.is_zero() || b.is_zero()) return 0.0;
    if (a.components == b.components) return 1.0;
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        dot += a.components[i] * b.components[i];
        na += a.components[i] * a.components[i];
        nb += b.components[i] * b.components[i];
    }
    return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

double similarity(std::string_view a, std::string_view b) { return cosine(embed(a), embed(b)); }

double distance(std::string_view a, std::string_view b) { return 1.0 - similarity(a, b); }

std::vector<std::string> segment(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || is_terminator(text[i])) {
            auto piece = trim_ascii(text.substr(start, i - start));
            if (!piece.empty()) out.emplace_back(piece);
            start = i + 1;
        }
    }
    return out;
}

double coherence(std::string_view text) {
    const auto segments = segment(text);
    if (segments.empty()) return 0.0;
    std::size_t good = 0;
    for (const auto& s : segments) {
        std::size_t tokens = 0;
        bool in_token = false;
        for (char c : s) {
            if (is_ascii_space(c)) {
                in_token = false;
            } else if (!in_token) {
                in_token = true;
                ++tokens;
            }
        }
        const auto cps = decode_utf8(s);
        if (tokens >= 3 && tokens <= 40 && !cps.empty() && is_alpha(cps.front())) ++good;
    }
    return static_cast<double>(good) / static_cast<double>(segments.size());
}

}  // namespace redteam::textops
