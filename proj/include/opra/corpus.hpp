#pragma once

#include "opra/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace opra {

enum class Source : std::uint8_t { amazon, google, imdb, other };
enum class Sentiment : std::uint8_t { unset, positive, negative };

std::string_view source_name(Source s);
Source parse_source(std::string_view s);
std::string_view sentiment_name(Sentiment s);

/// Per-concept standardization parameters. `min`/`max` are taken over the
/// z-scores, so scaled = ((raw - mean) / std - min) / (max - min).
struct ScalingParams {
    double mean = 0.0;
    double std = 0.0;
    double min = 0.0;
    double max = 0.0;
    bool operator==(const ScalingParams&) const = default;
};

struct SentenceRecord {
    std::int64_t id = 0;
    std::string text;
    Source source = Source::other;
    std::vector<double> embedding;
    Sentiment sentiment = Sentiment::unset;
    double sentiment_probability = 0.0;
    ConceptMap<std::optional<double>> coc_raw;
    /// Scaled certainty in [0,1].
    ConceptMap<std::optional<double>> coc;
    ConceptMap<std::optional<bool>> llm_label;
    ConceptMap<std::optional<bool>> expert_label;
    bool excluded = false;

    bool operator==(const SentenceRecord&) const = default;
};

struct Provenance {
    std::string source_path;
    std::string ingested_at;
    bool operator==(const Provenance&) const = default;
};

struct Dataset {
    std::vector<SentenceRecord> records;
    std::vector<Concept> concepts{kAllConcepts.begin(), kAllConcepts.end()};
    Provenance provenance;
    ConceptMap<std::optional<ScalingParams>> coc_scaling;

    bool operator==(const Dataset&) const = default;

    SentenceRecord* find(std::int64_t id);
    const SentenceRecord* find(std::int64_t id) const;
    std::size_t active_count() const;
};

enum class InputFormat : std::uint8_t { csv, jsonl };
InputFormat parse_format(std::string_view s);

/// Reads one sentence per row/line. Ids are assigned 0..n-1 in input order.
Dataset ingest(const std::filesystem::path& path, InputFormat format, Source source = Source::other);

Dataset ingest_jsonl_text(std::string_view content, Source source = Source::other);
Dataset ingest_csv_text(std::string_view content, Source source = Source::other);

enum class PruneRule : std::uint8_t { near_duplicate, uninformative };
std::string_view prune_rule_name(PruneRule r);

struct PruneOptions {
    double dup_threshold = 0.05;
    std::size_t min_tokens = 2;
};

struct Removal {
    std::int64_t id = 0;
    PruneRule rule = PruneRule::uninformative;
    /// Cosine distance for near duplicates, alphabetic token count otherwise.
    double value = 0.0;
    std::optional<std::int64_t> duplicate_of;
};

struct PruneReport {
    PruneOptions options;
    std::size_t considered = 0;
    std::vector<Removal> removals;
};

struct PruneResult {
    Dataset dataset;
    PruneReport report;
};

/// Marks uninformative and near-duplicate records as excluded. Records already
/// excluded are skipped and never act as the survivor of a duplicate pair.
PruneResult prune_uninformative(Dataset ds, const PruneOptions& options = {});

inline constexpr int kDatasetVersion = 1;

nlohmann::json to_json(const Dataset& ds);
Dataset dataset_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PruneReport& report);

void save(const Dataset& ds, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

}  // namespace opra
