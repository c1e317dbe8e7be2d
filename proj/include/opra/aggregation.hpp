#pragma once

#include "opra/common.hpp"
#include "opra/corpus.hpp"
#include "opra/text.hpp"

#include <nlohmann/json_fwd.hpp>

#include <set>
#include <span>
#include <string>
#include <vector>

// Tag-cloud word statistics per (concept, label side) and selection highlights.

namespace opra {

struct TagCloudEntry {
    std::string word;
    std::size_t frequency = 0;
    /// Majority sentiment of the sentences the word came from; ties go positive.
    Sentiment sentiment = Sentiment::positive;
    bool operator==(const TagCloudEntry&) const = default;
};

struct TagCloud {
    Concept concept_id = Concept::trust;
    LabelSide side = LabelSide::true_side;
    /// Sorted by frequency descending, then word; at most top_n entries.
    std::vector<TagCloudEntry> entries;
    /// Normalized tokens of this side before truncation.
    std::size_t total_tokens = 0;
    std::size_t sentences = 0;
};

struct TagClouds {
    TagCloud true_side;
    TagCloud false_side;
    const TagCloud& side(LabelSide s) const { return s == LabelSide::true_side ? true_side : false_side; }
};

struct CloudOptions {
    std::size_t top_n = 60;
    /// Words kept even when they are stopwords or short.
    std::set<std::string> keep_list;
};

/// Words of every active sentence with an LLM label for `c`, grouped by the
/// label side. A word's sentiment is the classified sentiment of its sentences.
TagClouds build_tagclouds(const Dataset& ds, Concept c, const CloudOptions& options = {});

/// Normalized words of the selected sentences that appear in a cloud, sorted.
std::vector<std::string> highlight(const Dataset& ds, std::span<const std::int64_t> selected, const TagCloud& cloud,
                                   const CloudOptions& options = {});

nlohmann::json to_json(const TagCloud& cloud, const std::vector<std::string>& highlighted = {});

}  // namespace opra
