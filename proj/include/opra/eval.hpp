#pragma once

#include "opra/common.hpp"
#include "opra/corpus.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

// Labeling accuracy against expert labels and table-shaped comparisons.

namespace opra {

/// Percentages are kept in hundredths so two-decimal rounding is exact.
struct Accuracy {
    std::size_t matches = 0;
    std::size_t total = 0;
    /// Sentences without a usable model label (null or unparseable).
    std::size_t unlabeled = 0;
    std::int64_t centi_percent = 0;

    double percent() const { return static_cast<double>(centi_percent) / 100.0; }
};

/// round_half_up(10000 * matches / total), in hundredths of a percent.
std::int64_t centi_percent(std::size_t matches, std::size_t total);

/// Half-up mean of hundredths values, still in hundredths.
std::int64_t centi_mean(const std::vector<std::int64_t>& values);

/// "75.00"
std::string format_centi(std::int64_t centi);

/// Accuracy of the dataset's llm_label against expert_label. Records missing
/// either label or excluded are skipped. Throws when nothing is comparable.
Accuracy score(const Dataset& ds, Concept c);

struct PredictionSet {
    std::string model;
    std::string strategy;
    std::int64_t k = 1;
    std::string dataset;
    /// Missing concept value or null = the model gave no usable answer.
    std::map<std::int64_t, ConceptMap<std::optional<bool>>> predictions;
};

PredictionSet prediction_set_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PredictionSet& p);
PredictionSet load_prediction_set(const std::filesystem::path& path);

/// Scores one concept of a prediction set against the dataset's expert labels.
/// Every record with an expert label must have a prediction entry.
Accuracy score_predictions(const Dataset& expert, const PredictionSet& p, Concept c);

struct AccuracyRow {
    std::string dataset;
    std::string model;
    std::string strategy;
    std::int64_t k = 1;
    ConceptMap<Accuracy> concepts;
    std::int64_t average_centi = 0;
    /// Best-in-group marks: four concepts then the average.
    std::array<bool, 5> winner{};
};

struct AccuracyReport {
    std::vector<AccuracyRow> rows;
};

/// One row per prediction set. Throws listing the offending ids when a set
/// does not cover exactly the sentences that carry expert labels.
AccuracyReport compare(const Dataset& expert, const std::vector<PredictionSet>& sets);

/// Appends b's rows to a and re-flags winners.
void merge(AccuracyReport& a, const AccuracyReport& b);

/// Flags, per (dataset, k) group and column, every row holding the maximum.
void flag_winners(AccuracyReport& report);

std::string render_table(const AccuracyReport& report);
nlohmann::json to_json(const AccuracyReport& report);

}  // namespace opra
