#include "opra/aggregation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>

namespace opra {

using nlohmann::json;

namespace {

text::ContentOptions content_options(const CloudOptions& options) {
    text::ContentOptions o;
    o.keep_list = options.keep_list;
    return o;
}

struct WordTally {
    std::size_t frequency = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
};

TagCloud finish(Concept c, LabelSide side, const std::map<std::string, WordTally>& tally, std::size_t total,
                std::size_t sentences, std::size_t top_n) {
    TagCloud cloud;
    cloud.concept_id = c;
    cloud.side = side;
    cloud.total_tokens = total;
    cloud.sentences = sentences;
    for (const auto& [word, t] : tally)
        cloud.entries.push_back(
            {word, t.frequency, t.negative > t.positive ? Sentiment::negative : Sentiment::positive});
    std::stable_sort(cloud.entries.begin(), cloud.entries.end(),
                     [](const TagCloudEntry& a, const TagCloudEntry& b) { return a.frequency > b.frequency; });
    if (cloud.entries.size() > top_n) cloud.entries.resize(top_n);
    return cloud;
}

}  // namespace

TagClouds build_tagclouds(const Dataset& ds, Concept c, const CloudOptions& options) {
    const auto content = content_options(options);
    std::map<std::string, WordTally> tally[2];
    std::size_t totals[2] = {0, 0};
    std::size_t sentences[2] = {0, 0};
    for (const auto& r : ds.records) {
        if (r.excluded || !r.llm_label[c]) continue;
        const int side = *r.llm_label[c] ? 1 : 0;
        ++sentences[side];
        for (const auto& word : text::content_tokens(r.text, content)) {
            auto& t = tally[side][word];
            ++t.frequency;
            if (r.sentiment == Sentiment::positive) ++t.positive;
            if (r.sentiment == Sentiment::negative) ++t.negative;
            ++totals[side];
        }
    }
    return {finish(c, LabelSide::true_side, tally[1], totals[1], sentences[1], options.top_n),
            finish(c, LabelSide::false_side, tally[0], totals[0], sentences[0], options.top_n)};
}

std::vector<std::string> highlight(const Dataset& ds, std::span<const std::int64_t> selected, const TagCloud& cloud,
                                   const CloudOptions& options) {
    const auto content = content_options(options);
    std::set<std::string> words;
    for (auto id : selected) {
        const auto* r = ds.find(id);
        if (!r || r->excluded) continue;
        for (auto& w : text::content_tokens(r->text, content)) words.insert(std::move(w));
    }
    std::vector<std::string> out;
    for (const auto& e : cloud.entries)
        if (words.contains(e.word)) out.push_back(e.word);
    std::sort(out.begin(), out.end());
    return out;
}

json to_json(const TagCloud& cloud, const std::vector<std::string>& highlighted) {
    json entries = json::array();
    for (const auto& e : cloud.entries)
        entries.push_back({{"word", e.word}, {"frequency", e.frequency}, {"sentiment", sentiment_name(e.sentiment)}});
    return {{"concept", concept_id(cloud.concept_id)},
            {"side", side_name(cloud.side)},
            {"entries", entries},
            {"total_tokens", cloud.total_tokens},
            {"highlight", highlighted}};
}

}  // namespace opra
