#include "opra/aggregation.hpp"
#include "opra/text.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

using namespace opra;

namespace {

SentenceRecord rec(std::int64_t id, std::string text, std::optional<bool> trust, Sentiment s) {
    SentenceRecord r{.id = id, .text = std::move(text)};
    r.llm_label[Concept::trust] = trust;
    r.sentiment = s;
    return r;
}

Dataset small() {
    Dataset ds;
    ds.records = {
        rec(0, "Honest staff, honest prices.", true, Sentiment::positive),
        rec(1, "The staff kept every promise.", true, Sentiment::negative),
        rec(2, "They lied about the prices.", false, Sentiment::negative),
        rec(3, "Staff were rude and prices hidden.", false, Sentiment::negative),
        rec(4, "No label on this one, staff.", std::nullopt, Sentiment::positive),
        rec(5, "Excluded staff staff staff.", true, Sentiment::positive),
    };
    ds.records[5].excluded = true;
    return ds;
}

const TagCloudEntry* entry(const TagCloud& c, const std::string& w) {
    for (const auto& e : c.entries)
        if (e.word == w) return &e;
    return nullptr;
}

}  // namespace

TEST_CASE("word normalization for clouds") {
    CHECK(text::lemma_lite("prices") == "price");
    CHECK(text::lemma_lite("promises") == "promise");
    CHECK(text::lemma_lite("working") == "work");
    CHECK(text::lemma_lite("glass") == "glass");
    CHECK(text::lemma_lite("batteries") == "battery");
    CHECK(text::is_stopword("the"));
    CHECK(text::content_tokens("The staff lied") == std::vector<std::string>{"staff", "lied"});
}

TEST_CASE("clouds split words by label side") {
    const auto clouds = build_tagclouds(small(), Concept::trust);
    CHECK(clouds.true_side.sentences == 2);
    CHECK(clouds.false_side.sentences == 2);

    const auto* honest = entry(clouds.true_side, "honest");
    REQUIRE(honest);
    CHECK(honest->frequency == 2);
    CHECK(honest->sentiment == Sentiment::positive);
    CHECK(clouds.true_side.entries.front().word == "honest");

    // one positive and one negative sentence: the tie goes positive
    const auto* staff = entry(clouds.true_side, "staff");
    REQUIRE(staff);
    CHECK(staff->frequency == 2);
    CHECK(staff->sentiment == Sentiment::positive);

    const auto* price = entry(clouds.false_side, "price");
    REQUIRE(price);
    CHECK(price->frequency == 2);
    CHECK(price->sentiment == Sentiment::negative);
    CHECK(entry(clouds.false_side, "honest") == nullptr);
    CHECK(entry(clouds.true_side, "excluded") == nullptr);
    CHECK(entry(clouds.true_side, "label") == nullptr);

    std::size_t total = 0;
    for (const auto& e : clouds.false_side.entries) total += e.frequency;
    CHECK(total == clouds.false_side.total_tokens);
}

TEST_CASE("cloud ordering, truncation and keep list") {
    CloudOptions opt;
    opt.top_n = 2;
    const auto clouds = build_tagclouds(small(), Concept::trust, opt);
    REQUIRE(clouds.true_side.entries.size() == 2);
    CHECK(clouds.true_side.entries[0].frequency >= clouds.true_side.entries[1].frequency);
    for (std::size_t i = 1; i < clouds.false_side.entries.size(); ++i) {
        const auto& a = clouds.false_side.entries[i - 1];
        const auto& b = clouds.false_side.entries[i];
        CHECK((a.frequency > b.frequency || (a.frequency == b.frequency && a.word < b.word)));
    }

    CloudOptions keep;
    keep.keep_list = {"no"};
    Dataset ds = small();
    ds.records[4].llm_label[Concept::trust] = false;
    CHECK(entry(build_tagclouds(ds, Concept::trust, keep).false_side, "no") != nullptr);
    CHECK(entry(build_tagclouds(ds, Concept::trust).false_side, "no") == nullptr);
}

TEST_CASE("highlight") {
    const Dataset ds = small();
    const auto clouds = build_tagclouds(ds, Concept::trust);
    const std::int64_t selected[] = {2, 5, 99};
    CHECK(highlight(ds, selected, clouds.false_side) == std::vector<std::string>{"lied", "price"});
    CHECK(highlight(ds, selected, clouds.true_side) == std::vector<std::string>{"price"});
    CHECK(highlight(ds, {}, clouds.true_side).empty());

    const auto j = to_json(clouds.false_side, {"price"});
    CHECK(j["side"] == "false");
    CHECK(j["highlight"][0] == "price");
}
