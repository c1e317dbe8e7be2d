#pragma once

#include "opra/matrix.hpp"
#include "opra/prompting.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Sentence-level aggregation of token attention (ISA) and the reasoning audit.

namespace opra {

/// Token index range [begin, end) of one transcript sentence.
struct TokenSpan {
    std::size_t sentence_id = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const TokenSpan&) const = default;
};

/// Thrown when the token stream does not spell out the text.
class AlignmentError : public Error {
public:
    AlignmentError(std::size_t offset, const std::string& what)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Maps each token to the sentence containing its first character. Token
/// texts are matched against `full_text` after dropping surrounding
/// whitespace and the word-start marks used by common tokenizers. Tokens that
/// are pure whitespace join the sentence in progress.
std::vector<TokenSpan> sentence_spans(std::span<const std::string> token_texts, std::string_view full_text,
                                      std::span<const Sentence> sentences);

enum class ExclusionReason : std::uint8_t { instruction_sentence, self_reference };
std::string_view exclusion_name(ExclusionReason r);

struct AttentionSummary {
    std::vector<std::size_t> ids;
    std::vector<bool> generated;
    /// isa(a, b): mean over target tokens of a of the attention summed over
    /// the source tokens of b.
    Matrix isa;
    /// Sentence ids left out of every audit ranking (S0).
    std::vector<std::size_t> instruction_excluded;
    bool available = false;
};

AttentionSummary aggregate_isa(const Matrix& attention, std::span<const TokenSpan> spans);

/// From an assessment: unavailable when the provider exported no attention.
AttentionSummary summarize(const AssessmentResult& result);

struct Influence {
    std::size_t id = 0;
    double isa = 0.0;
    /// 1-based over non-excluded entries, by ISA descending then id.
    std::optional<std::size_t> rank;
    /// 0..4, ISA relative to the strongest non-excluded influence.
    std::optional<int> bucket;
    std::optional<ExclusionReason> excluded;
};

struct AuditView {
    std::size_t generated_id = 0;
    std::vector<Influence> influences;
    bool available = false;

    /// Highest ranked non-excluded influence, if any.
    std::optional<std::size_t> top() const;
};

/// ISA(g, b) for b <= g; S0 and g itself are reported but flagged excluded.
/// Throws Error when g is not a generated sentence.
AuditView audit_view(const AttentionSummary& summary, std::size_t g);

nlohmann::json to_json(const AuditView& view);

}  // namespace opra
