#include "opra/eval.hpp"

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <map>

using namespace opra;
using nlohmann::json;

namespace {

std::string file_stem(const json& row) {
    std::string model = row.at("model");
    std::string tag;
    for (char ch : model)
        if (ch != ' ' && ch != '-') tag += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return std::string(row.at("dataset")) + "_" + tag + "_" + std::string(row.at("strategy")) + "_k" +
           std::to_string(row.at("k").get<int>());
}

const Dataset& expert(const std::string& name) {
    static std::map<std::string, Dataset> cache;
    auto it = cache.find(name);
    if (it == cache.end()) {
        const std::string rel = name == "amazon" ? "eval/amazon_expert.json" : name + "/dataset.json";
        it = cache.emplace(name, load(fixtures::path(rel))).first;
    }
    return it->second;
}

/// Scores every row of one stored table, one compare() per dataset, then
/// flags winners across the whole table.
AccuracyReport score_table(const json& table) {
    std::map<std::string, std::vector<PredictionSet>> by_dataset;
    std::vector<std::string> order;
    for (const auto& row : table.at("rows")) {
        const std::string ds = row.at("dataset");
        if (!by_dataset.contains(ds)) order.push_back(ds);
        by_dataset[ds].push_back(load_prediction_set(fixtures::path("eval/predictions/" + file_stem(row) + ".json")));
    }
    AccuracyReport report;
    for (const auto& ds : order) merge(report, compare(expert(ds), by_dataset[ds]));
    return report;
}

}  // namespace

TEST_CASE("centi-percent rounding") {
    for (std::int64_t total : {1, 3, 7, 100, 198}) {
        for (std::int64_t m = 0; m <= total; ++m) {
            const std::int64_t c = centi_percent(static_cast<std::size_t>(m), static_cast<std::size_t>(total));
            CHECK(format_centi(c) == oracle::percent_string(m, total));
        }
    }
    CHECK(format_centi(7500) == "75.00");
    CHECK(format_centi(5) == "0.05");
    CHECK(centi_mean({7700, 8800, 6300, 7200}) == 7500);
    CHECK(centi_mean({1, 2}) == 2);
}

TEST_CASE("both tables reproduce the stored rows") {
    const json expected = fixtures::json_file("eval/expected.json");
    REQUIRE(expected["tables"].size() == 2);
    for (const auto& table : expected["tables"]) {
        CAPTURE(table["name"].get<std::string>());
        const auto report = score_table(table);
        const auto& rows = table["rows"];
        REQUIRE(report.rows.size() == rows.size());
        for (const auto& want : rows) {
            CAPTURE(file_stem(want));
            const AccuracyRow* found = nullptr;
            for (const auto& row : report.rows)
                if (row.dataset == want["dataset"] && row.model == want["model"] && row.strategy == want["strategy"] &&
                    row.k == want["k"])
                    found = &row;
            REQUIRE(found != nullptr);
            const AccuracyRow& got = *found;
            std::size_t j = 0;
            for (Concept c : kAllConcepts) {
                CHECK(got.concepts[c].centi_percent == want["percent"][j].get<std::int64_t>() * 100);
                CHECK(got.concepts[c].total == 100);
                ++j;
            }
            CHECK(format_centi(got.average_centi) == want["average"]);
            for (std::size_t k = 0; k < 5; ++k) CHECK(got.winner[k] == want["bold"][k].get<bool>());
        }
    }
}

TEST_CASE("Gemma rows") {
    const json expected = fixtures::json_file("eval/expected.json");
    const auto report = score_table(expected["tables"][0]);
    std::map<std::pair<std::string, std::int64_t>, std::string> gemma;
    for (const auto& row : report.rows)
        if (row.model == "Gemma") gemma[{row.dataset, row.k}] = format_centi(row.average_centi);
    CHECK(gemma[{"amazon", 1}] == "75.00");
    CHECK(gemma[{"google", 1}] == "71.50");
    CHECK(gemma[{"imdb", 1}] == "78.00");
    CHECK(gemma[{"amazon", 8}] == "77.50");
    CHECK(gemma[{"google", 8}] == "75.75");
    CHECK(gemma[{"imdb", 8}] == "86.25");

    const auto one = score_predictions(expert("amazon"), load_prediction_set(fixtures::path(
                                                             "eval/predictions/amazon_gemma_cot_cr_k1.json")),
                                       Concept::trust);
    CHECK(one.centi_percent == 7700);
}

TEST_CASE("vanilla one-shot IMDB control mutuality") {
    const auto p = load_prediction_set(fixtures::path("eval/predictions/imdb_gemma_vanilla_k1.json"));
    const auto a = score_predictions(expert("imdb"), p, Concept::control_mutuality);
    CHECK(format_centi(a.centi_percent) == "18.00");
    CHECK(a.unlabeled <= 2);
    CHECK(a.matches == 18);
}

TEST_CASE("identical prediction sets give identical rows") {
    const auto p = load_prediction_set(fixtures::path("eval/predictions/google_gpt3_cot_cr_k8.json"));
    const auto report = compare(expert("google"), {p, p});
    REQUIRE(report.rows.size() == 2);
    for (Concept c : kAllConcepts)
        CHECK(report.rows[0].concepts[c].centi_percent == report.rows[1].concepts[c].centi_percent);
    CHECK(report.rows[0].winner == report.rows[1].winner);
    CHECK(report.rows[0].winner == std::array<bool, 5>{true, true, true, true, true});
    CHECK(render_table(report).find("GPT-3") != std::string::npos);
    CHECK(to_json(report)["rows"].size() == 2);
}

TEST_CASE("coverage errors name the ids") {
    auto p = load_prediction_set(fixtures::path("eval/predictions/google_gpt3_cot_cr_k8.json"));
    p.predictions.erase(17);
    CHECK_THROWS_WITH(compare(expert("google"), {p}), doctest::Contains("17"));
    p.predictions[17] = {};
    p.predictions[5000] = {};
    CHECK_THROWS_WITH(compare(expert("google"), {p}), doctest::Contains("5000"));
}

TEST_CASE("dataset score") {
    Dataset ds = expert("imdb");
    CHECK_THROWS(score(ds, Concept::trust));
    for (auto& r : ds.records) r.llm_label[Concept::trust] = r.expert_label[Concept::trust];
    CHECK(score(ds, Concept::trust).centi_percent == 10000);
    ds.records[0].llm_label[Concept::trust] = !*ds.records[0].expert_label[Concept::trust];
    ds.records[1].excluded = true;
    const auto a = score(ds, Concept::trust);
    CHECK(a.total == 99);
    CHECK(a.matches == 98);
    CHECK(format_centi(a.centi_percent) == oracle::percent_string(98, 99));

    Dataset shuffled = ds;
    std::reverse(shuffled.records.begin(), shuffled.records.end());
    CHECK(score(shuffled, Concept::trust).centi_percent == a.centi_percent);
}
