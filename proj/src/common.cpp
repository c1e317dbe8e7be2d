#include "opra/common.hpp"

#include <algorithm>
#include <cctype>

namespace opra {

std::string_view concept_id(Concept c) {
    switch (c) {
        case Concept::trust: return "trust";
        case Concept::satisfaction: return "satisfaction";
        case Concept::commitment: return "commitment";
        case Concept::control_mutuality: return "control_mutuality";
    }
    return "unknown";
}

std::string_view concept_marker(Concept c) {
    switch (c) {
        case Concept::trust: return "TRUST";
        case Concept::satisfaction: return "SATISFACTION";
        case Concept::commitment: return "COMMITMENT";
        case Concept::control_mutuality: return "CONTROL MUTUALITY";
    }
    return "UNKNOWN";
}

std::optional<Concept> parse_concept(std::string_view text) {
    std::string key;
    key.reserve(text.size());
    for (char ch : text) {
        if (ch == ' ' || ch == '-') ch = '_';
        key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    if (key == "trust" || key == "t") return Concept::trust;
    if (key == "satisfaction" || key == "s") return Concept::satisfaction;
    if (key == "commitment" || key == "c") return Concept::commitment;
    if (key == "control_mutuality" || key == "controlmutuality" || key == "cm") return Concept::control_mutuality;
    return std::nullopt;
}

Concept require_concept(std::string_view text) {
    if (auto c = parse_concept(text)) return *c;
    throw Error("unknown concept: " + std::string(text));
}

std::string_view side_name(LabelSide side) {
    return side == LabelSide::true_side ? "true" : "false";
}

}  // namespace opra
