#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace opra {

/// Base error for every failure the engine reports to callers.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input could not be parsed (files, continuations, requests).
class ParseError : public Error {
public:
    using Error::Error;
};

/// A remote provider could not be reached or answered with garbage.
class TransportError : public Error {
public:
    TransportError(std::string endpoint, const std::string& what)
        : Error(what + " [endpoint " + endpoint + "]"), endpoint_(std::move(endpoint)) {}
    const std::string& endpoint() const noexcept { return endpoint_; }

private:
    std::string endpoint_;
};

enum class Concept : std::uint8_t { trust = 0, satisfaction = 1, commitment = 2, control_mutuality = 3 };

inline constexpr std::size_t kConceptCount = 4;
inline constexpr std::array<Concept, kConceptCount> kAllConcepts{
    Concept::trust, Concept::satisfaction, Concept::commitment, Concept::control_mutuality};

/// Fixed-size per-concept storage indexed by Concept.
template <typename T>
struct ConceptMap {
    std::array<T, kConceptCount> values{};

    T& operator[](Concept c) { return values[static_cast<std::size_t>(c)]; }
    const T& operator[](Concept c) const { return values[static_cast<std::size_t>(c)]; }
    bool operator==(const ConceptMap&) const = default;
};

constexpr std::size_t index_of(Concept c) { return static_cast<std::size_t>(c); }

/// Lower-case identifier used in files and URLs ("control_mutuality").
std::string_view concept_id(Concept c);

/// Upper-case section marker name used in prompts ("CONTROL MUTUALITY").
std::string_view concept_marker(Concept c);

/// Accepts the identifier, the marker spelling, or common variants.
std::optional<Concept> parse_concept(std::string_view text);

/// Throws Error("unknown concept: ...") instead of returning nullopt.
Concept require_concept(std::string_view text);

enum class LabelSide : std::uint8_t { false_side = 0, true_side = 1 };

inline LabelSide side_of(bool label) { return label ? LabelSide::true_side : LabelSide::false_side; }
std::string_view side_name(LabelSide side);

}  // namespace opra
