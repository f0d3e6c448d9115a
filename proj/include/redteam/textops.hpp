#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace redteam::textops {

inline constexpr std::size_t kEmbeddingDim = 256;

/// Hashed character-trigram embedding. Either unit L2 norm or all zeros.
struct FeatureVector {
    std::array<double, kEmbeddingDim> components{};

    [[nodiscard]] bool is_zero() const noexcept;
};

/// Lower-case, strip Unicode punctuation (category P), collapse whitespace
/// runs to one space, trim.
std::string canonicalize(std::string_view text);

/// Whitespace-separated tokens of canonicalize(text).
std::vector<std::string> canonical_tokens(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

FeatureVector embed(std::string_view text);

/// Cosine of the two embeddings; 0 when either is the zero vector.
double cosine(const FeatureVector& a, const FeatureVector& b) noexcept;

double similarity(std::string_view a, std::string_view b);
double distance(std::string_view a, std::string_view b);

/// Split on '.', '!', '?', '\n'; trim pieces; drop empties.
std::vector<std::string> segment(std::string_view text);

/// Fraction of segments with 3..40 whitespace tokens and an alphabetic first
/// character. Zero for text without segments.
double coherence(std::string_view text);

// UTF-8 helpers used by the character-level mutation operators.
std::vector<char32_t> decode_utf8(std::string_view text);
std::string encode_utf8(const std::vector<char32_t>& cps);
void append_utf8(std::string& out, char32_t cp);

}  // namespace redteam::textops
