#pragma once

#include "opra/common.hpp"
#include "opra/corpus.hpp"
#include "opra/providers.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace opra {

enum class Strategy : std::uint8_t { vanilla, cot, cot_cr };
std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view s);

/// Section markers. The concept marker is concept_marker(c) + ":".
struct Markers {
    static constexpr std::string_view input = "INPUT:";
    static constexpr std::string_view clues = "CLUES:";
    static constexpr std::string_view reasoning = "REASONING:";
};
std::string label_marker(Concept c);

struct FewShotExample {
    std::string input;
    std::string clues;
    std::string reasoning;
    bool label = false;
    bool operator==(const FewShotExample&) const = default;
};

struct PromptTemplate {
    Concept concept_id = Concept::trust;
    Strategy strategy = Strategy::cot_cr;
    std::int64_t version = 1;
    std::vector<std::string> instructions;
    std::vector<FewShotExample> examples;

    std::size_t k() const { return examples.size(); }
    /// Throws Error when there are no examples or instructions, or a
    /// field the strategy uses is empty.
    void validate() const;
    bool operator==(const PromptTemplate&) const = default;
};

nlohmann::json to_json(const PromptTemplate& t);
PromptTemplate template_from_json(const nlohmann::json& doc);
PromptTemplate load_template(const std::filesystem::path& path);

enum class SentenceRole : std::uint8_t {
    instruction,
    example_input,
    example_clues,
    example_reasoning,
    example_label,
    target,
    clues,
    reasoning,
    label,
    other,
};
std::string_view role_name(SentenceRole r);

/// One transcript sentence with its byte range in the full text.
struct Sentence {
    std::size_t id = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    SentenceRole role = SentenceRole::other;
    bool generated = false;
    std::string text;
};

struct AssembledPrompt {
    std::string text;
    /// Prompt sentences S0..S_target. The trailing cue is not a sentence of
    /// its own: it opens the first generated sentence.
    std::vector<Sentence> sentences;
    std::string cue;
};

/// Deterministic prompt: instruction sentences one per line, a blank line,
/// then one block per example and finally the target input and the cue.
AssembledPrompt assemble(const PromptTemplate& t, std::string_view target);

/// Splits an instruction into sentences at '.', '!' or '?' followed by whitespace.
std::vector<std::string> split_sentences(std::string_view instruction);

/// Segments prompt + continuation into sentences: every non-empty line, with
/// lines further split in front of any section marker that does not start
/// the line. Sentences ending after `prompt_size` are flagged generated. The
/// last INPUT sentence of the prompt is the target; marker sentences after it
/// take the generated roles.
std::vector<Sentence> segment(std::string_view full_text, std::size_t prompt_size, Concept c);

struct ParsedAnswer {
    std::string clues;
    std::string reasoning;
    bool label = false;
    bool operator==(const ParsedAnswer&) const = default;
};

/// Reads CLUES / REASONING / label sections. `text` is the cue followed by
/// the continuation (or just the continuation when it repeats the marker).
/// Throws ParseError("unlabeled continuation") without a true/false label.
ParsedAnswer parse(std::string_view text, Concept c);

/// Inverse of parse for a given strategy; what a well-behaved model writes.
std::string synthesize(const ParsedAnswer& answer, Concept c, Strategy s);

struct AssessmentResult {
    std::int64_t sentence_id = 0;
    Concept concept_id = Concept::trust;
    Strategy strategy = Strategy::cot_cr;
    std::int64_t template_version = 0;
    std::string clues;
    std::string reasoning;
    bool label = false;
    std::string prompt;
    std::string continuation;
    std::vector<Sentence> transcript;
    std::vector<std::string> token_texts;
    std::optional<Matrix> attention;
};

nlohmann::json to_json(const AssessmentResult& r);

/// assemble -> generate -> parse, then records the label on `record`.
/// On any error the record is left untouched.
AssessmentResult assess(SentenceRecord& record, Concept c, const PromptTemplate& t, const LanguageModel& llm);

/// Same, without touching a record.
AssessmentResult assess_text(std::int64_t id, std::string_view text, Concept c, const PromptTemplate& t,
                             const LanguageModel& llm);

// --- Editing ------------------------------------------------------------

struct TemplateEdit {
    std::optional<std::vector<std::string>> instructions;
    std::optional<std::vector<FewShotExample>> examples;
};

nlohmann::json to_json(const TemplateEdit& e);
TemplateEdit template_edit_from_json(const nlohmann::json& doc);

/// One changed region of the rendered template, in byte offsets of the old
/// and the new rendering.
struct DiffHunk {
    std::size_t old_begin = 0;
    std::size_t old_end = 0;
    std::size_t new_begin = 0;
    std::size_t new_end = 0;
    std::string old_text;
    std::string new_text;
};

/// Word-level LCS diff of two texts, contiguous changes merged into hunks.
std::vector<DiffHunk> word_diff(std::string_view before, std::string_view after);

/// The template as shown in the editor: the assembled prompt without target.
std::string render_template(const PromptTemplate& t);

struct EditResult {
    PromptTemplate updated;
    std::vector<DiffHunk> diff;
};

/// Applies the edit to a copy; the version always increases by one.
EditResult edit_template(const PromptTemplate& t, const TemplateEdit& edit);

nlohmann::json to_json(const std::vector<DiffHunk>& diff);

/// Every version of every (concept, strategy) template. Versions are immutable.
class TemplatePool {
public:
    void add(PromptTemplate t);
    const PromptTemplate& latest(Concept c, Strategy s) const;
    const PromptTemplate& get(Concept c, Strategy s, std::int64_t version) const;
    bool contains(Concept c, Strategy s) const;
    EditResult edit(Concept c, Strategy s, const TemplateEdit& edit);
    std::vector<PromptTemplate> all() const;

    nlohmann::json to_json() const;
    static TemplatePool from_json(const nlohmann::json& doc);
    void save(const std::filesystem::path& path) const;
    static TemplatePool load(const std::filesystem::path& path);

private:
    std::map<std::pair<Concept, Strategy>, std::vector<PromptTemplate>> versions_;
};

// --- Re-assessment --------------------------------------------------------

enum class Scope : std::uint8_t { filtered_subset, all };
std::string_view scope_name(Scope s);
Scope parse_scope(std::string_view s);

struct ReassessRow {
    std::int64_t id = 0;
    std::optional<bool> old_label;
    std::optional<bool> new_label;
    bool changed = false;
    std::string error;
};

struct ReassessReport {
    Concept concept_id = Concept::trust;
    std::int64_t template_version = 0;
    std::vector<ReassessRow> rows;
    std::size_t changed_count() const;
    std::size_t error_count() const;
};

nlohmann::json to_json(const ReassessReport& r);

struct ReassessOptions {
    std::size_t parallelism = 4;
    /// Persists one sentence's result; called once per success, serialized.
    /// Defaults to writing llm_label into the dataset.
    std::function<void(const AssessmentResult&)> commit;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Ids the scope covers: the given filtered ids, or every active record.
/// Excluded and unknown ids are dropped; the result is sorted.
std::vector<std::int64_t> scope_ids(const Dataset& ds, Scope scope, const std::vector<std::int64_t>& filtered);

/// Assesses every id with bounded parallelism. Failures land in the report and
/// leave their records alone; rows come back ordered by id.
ReassessReport reassess_all(Dataset& ds, const std::vector<std::int64_t>& ids, Concept c, const PromptTemplate& t,
                            const LanguageModel& llm, const ReassessOptions& options = {});

}  // namespace opra
