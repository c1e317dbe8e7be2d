#pragma once

#include "opra/common.hpp"
#include "opra/corpus.hpp"
#include "opra/matrix.hpp"
#include "opra/providers.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

// Certainty of concepts: scaled dot-product attention between a sentence
// embedding and the key embeddings of each concept's expert instructions.

namespace opra {

struct InstructionKey {
    Embedding values;
    double norm = 0.0;
};

InstructionKey make_key(Embedding values);

struct ExpertInstruction {
    Concept concept_id = Concept::trust;
    LabelSide label = LabelSide::true_side;
    std::string text;
    std::vector<InstructionKey> keys;
};

/// Instructions for one concept, split by label side.
struct ConceptSpec {
    Concept id = Concept::trust;
    std::vector<ExpertInstruction> true_side;
    std::vector<ExpertInstruction> false_side;
};

/// softmax over k of (h . C_k) / sqrt(d_k), each weighted by |C_k|; returns the max.
double instruction_weight(std::span<const double> h, const ExpertInstruction& instruction);

/// Mean of instruction_weight over instructions sharing one (concept, label).
double concept_weight(std::span<const double> h, std::span<const ExpertInstruction> instructions);

/// Combines the two label weights: w_true / (w_true + w_false), or 0.5 when
/// both are zero. The result is rounded to a multiple of 2^-53 so that
/// 1 - c is exactly representable and swapping the label sides yields
/// exactly 1 - c.
double coc_from_weights(double w_true, double w_false);

double coc_raw(std::span<const double> h, const ConceptSpec& spec);

struct CoCMatrix {
    std::vector<std::int64_t> ids;
    std::vector<Concept> concepts;
    /// rows = sentences, cols = concepts (in `concepts` order).
    Matrix raw;
    Matrix scaled;
    std::vector<ScalingParams> params;
};

/// Per-column z-score standardization followed by min-max mapping to [0,1].
/// Degenerate columns (std == 0 or max == min) map to 0.5.
ScalingParams fit_scaling(std::span<const double> raw);
double apply_scaling(double raw, const ScalingParams& params);
CoCMatrix rescale(std::vector<std::int64_t> ids, std::vector<Concept> concepts, Matrix raw);

/// Builds concept specs from the instruction file; keys are the embeddings of
/// each instruction token.
std::vector<ConceptSpec> load_instructions(const std::filesystem::path& path, const Embedder& embedder);
std::vector<ConceptSpec> instructions_from_json(const nlohmann::json& doc, const Embedder& embedder);
ExpertInstruction embed_instruction(Concept c, LabelSide side, std::string text, const Embedder& embedder);

/// Raw + scaled CoC for every non-excluded record, written back into the
/// dataset together with the scaling parameters.
CoCMatrix compute_coc(Dataset& ds, std::span<const ConceptSpec> specs);

}  // namespace opra
