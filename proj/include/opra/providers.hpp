#pragma once

#include "opra/common.hpp"
#include "opra/matrix.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// External models behind narrow contracts: a sentence embedder, a sentiment
// classifier, and a generative model that may export attention. Reference
// implementations are deterministic and need no network or weights.

namespace opra {

using Embedding = std::vector<double>;

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Embedding embed(std::string_view text) const = 0;
    virtual std::size_t dimension() const = 0;
    /// How token states are pooled into one vector ("cls", "mean", ...).
    virtual std::string pooling() const = 0;
};

/// Feature-hashing embedder. Each normalized token maps to a pseudo-random
/// vector seeded by its hash; the sentence vector is their normalized sum, so
/// equal texts give equal unit vectors and shared words raise similarity.
class ReferenceEmbedder final : public Embedder {
public:
    explicit ReferenceEmbedder(std::size_t dimension = 768, std::uint64_t seed = 0x6f707261ULL);
    Embedding embed(std::string_view text) const override;
    std::size_t dimension() const override { return dimension_; }
    std::string pooling() const override { return "hashed-bag-of-tokens"; }

private:
    void accumulate(std::string_view token, Embedding& out) const;
    std::size_t dimension_;
    std::uint64_t seed_;
};

/// POST {base}/embed {"text"} -> {"values": [...]}
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(std::string base_url, std::size_t dimension, std::string pooling = "provider-defined");
    Embedding embed(std::string_view text) const override;
    std::size_t dimension() const override { return dimension_; }
    std::string pooling() const override { return pooling_; }

private:
    std::string base_url_;
    std::size_t dimension_;
    std::string pooling_;
};

enum class SentimentLabel : std::uint8_t { positive, negative };

struct SentimentResult {
    SentimentLabel label = SentimentLabel::positive;
    double probability = 0.5;
    /// Set when nothing survived normalization and the fallback was used.
    bool fallback = false;
};

class SentimentClassifier {
public:
    virtual ~SentimentClassifier() = default;
    virtual SentimentResult classify(std::string_view text) const = 0;
};

/// score = positive hits - negative hits over normalized content tokens;
/// positive iff score >= 0; probability = 0.5 + min(0.5, 0.1 * |score|).
class LexiconSentimentClassifier final : public SentimentClassifier {
public:
    LexiconSentimentClassifier();
    LexiconSentimentClassifier(std::vector<std::string> positive, std::vector<std::string> negative);
    SentimentResult classify(std::string_view text) const override;

private:
    std::vector<std::string> positive_;
    std::vector<std::string> negative_;
};

struct GenerationResult {
    std::string text;
    /// Tokens of prompt followed by continuation.
    std::vector<std::string> token_texts;
    /// Square, rows = target tokens, cols = source tokens. Absent when the
    /// provider cannot export attention.
    std::optional<Matrix> attention;
};

class LanguageModel {
public:
    virtual ~LanguageModel() = default;
    virtual GenerationResult generate(std::string_view prompt) const = 0;
};

/// One canned answer of the scripted model. Each plan entry gives
/// ((target sentence, source sentence), weight): every token of the target
/// sentence sends `weight` to the first token of the source sentence. The
/// rest of a row is spread uniformly over the causal prefix. Sentences are
/// the non-empty lines of prompt + continuation, numbered from 0.
struct ScriptEntry {
    std::string text;
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, double>> attention_plan;
};

class ScriptedLanguageModel final : public LanguageModel {
public:
    explicit ScriptedLanguageModel(std::map<std::string, ScriptEntry> script, std::size_t token_budget = 4096);
    static ScriptedLanguageModel from_json(const nlohmann::json& doc, std::size_t token_budget = 4096);
    static ScriptedLanguageModel from_file(const std::filesystem::path& path, std::size_t token_budget = 4096);

    GenerationResult generate(std::string_view prompt) const override;
    const std::map<std::string, ScriptEntry>& script() const noexcept { return script_; }

private:
    std::map<std::string, ScriptEntry> script_;
    std::size_t token_budget_;
};

nlohmann::json to_json(const std::map<std::string, ScriptEntry>& script);

/// Builds the scripted model's attention for a whitespace-tokenized text.
/// Exposed so tests can check it against the contract without the model.
Matrix scripted_attention(std::string_view full_text, const ScriptEntry& entry);

/// POST {base}/generate {"prompt","max_tokens"} -> {"text","token_texts","attention"?}
class RemoteLanguageModel final : public LanguageModel {
public:
    RemoteLanguageModel(std::string base_url, std::size_t max_tokens = 256, std::size_t token_budget = 4096);
    GenerationResult generate(std::string_view prompt) const override;

private:
    std::string base_url_;
    std::size_t max_tokens_;
    std::size_t token_budget_;
};

/// Whitespace token count used for prompt budget checks.
std::size_t prompt_token_count(std::string_view prompt);

}  // namespace opra
