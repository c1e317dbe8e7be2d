#include "opra/prompting.hpp"
#include "opra/providers.hpp"
#include "opra/text.hpp"

#include "../support/fixtures.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <random>

using namespace opra;
using nlohmann::json;

namespace {

const std::string kNegation =
    "The keyboard is easy to clean, and water doesn't bother it too much because the keys sit clear of the base.";

TemplatePool fixture_pool() { return TemplatePool::load(fixtures::path("templates/pool.json")); }

TemplateEdit fixture_edit(const std::string& name) {
    return template_edit_from_json(fixtures::json_file("templates/edits/" + name + ".json").at("edit"));
}

std::string random_phrase(std::mt19937_64& rng) {
    static const std::vector<std::string> words{"the",  "keys", "True",  "false", "water", "doesn't", "bother",
                                                "it",   "much", "x:",    "none.", "42",    "a;b",     "quick,",
                                                "Ünï", "fast", "TRUST", "clues", "()",    "-"};
    std::uniform_int_distribution<std::size_t> len(1, 12), pick(0, words.size() - 1);
    std::string s;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + words[pick(rng)];
    return s;
}

/// Label the scripted continuation gives, read straight off the script text.
std::optional<bool> scripted_label(const json& script, const std::string& prompt, const std::string& marker) {
    const auto it = script.find(text::fingerprint(prompt));
    if (it == script.end()) return std::nullopt;
    const std::string cont = it->at("text");
    const auto at = cont.rfind(marker + " ");
    REQUIRE(at != std::string::npos);
    return cont.compare(at + marker.size() + 1, 4, "True") == 0;
}

}  // namespace

TEST_CASE("assembled prompts match the goldens byte for byte") {
    const auto pool = fixture_pool();
    const std::string target = fixtures::read(fixtures::path("prompts/target.txt"));
    CHECK(target == kNegation + "\n");
    for (auto s : {Strategy::cot_cr, Strategy::cot, Strategy::vanilla}) {
        const auto p = assemble(pool.latest(Concept::satisfaction, s), kNegation);
        const std::string golden =
            fixtures::read(fixtures::path("prompts/satisfaction_" + std::string(strategy_name(s)) + ".txt"));
        CHECK(p.text == golden);
    }
}

TEST_CASE("prompt sentence numbering") {
    const auto pool = fixture_pool();
    const auto p = assemble(pool.latest(Concept::satisfaction, Strategy::cot_cr), kNegation);
    CHECK(p.cue == "CLUES:");
    REQUIRE(p.sentences.size() == 9);
    for (std::size_t i = 0; i < 4; ++i) CHECK(p.sentences[i].role == SentenceRole::instruction);
    CHECK(p.sentences[4].role == SentenceRole::example_input);
    CHECK(p.sentences[5].role == SentenceRole::example_clues);
    CHECK(p.sentences[6].role == SentenceRole::example_reasoning);
    CHECK(p.sentences[7].role == SentenceRole::example_label);
    CHECK(p.sentences[8].role == SentenceRole::target);
    CHECK(p.sentences[8].text == "INPUT: " + kNegation);
    for (const auto& s : p.sentences) {
        CHECK_FALSE(s.generated);
        CHECK(p.text.substr(s.begin, s.end - s.begin) == s.text);
    }

    SUBCASE("generated sentences continue the numbering") {
        const std::string cont = " True: a. False: b.\nREASONING: because.\nSATISFACTION: False";
        const auto all = segment(p.text + cont, p.text.size(), Concept::satisfaction);
        REQUIRE(all.size() == 12);
        CHECK(all[9].role == SentenceRole::clues);
        CHECK(all[9].generated);
        CHECK(all[9].text == "CLUES: True: a. False: b.");
        CHECK(all[10].role == SentenceRole::reasoning);
        CHECK(all[11].role == SentenceRole::label);
    }
    SUBCASE("markers mid-line start a new sentence") {
        const auto all = segment(p.text + " x REASONING: y SATISFACTION: True", p.text.size(), Concept::satisfaction);
        REQUIRE(all.size() == 12);
        CHECK(all[10].text == "REASONING: y");
    }
}

TEST_CASE("vanilla and cot leave out what they do not use") {
    const auto pool = fixture_pool();
    const auto vanilla = assemble(pool.latest(Concept::satisfaction, Strategy::vanilla), kNegation);
    CHECK(vanilla.text.find("CLUES:") == std::string::npos);
    CHECK(vanilla.text.find("REASONING:") == std::string::npos);
    CHECK(vanilla.cue == "SATISFACTION:");
    const auto cot = assemble(pool.latest(Concept::satisfaction, Strategy::cot), kNegation);
    CHECK(cot.text.find("CLUES:") == std::string::npos);
    CHECK(cot.cue == "REASONING:");
    CHECK(label_marker(Concept::control_mutuality) == "CONTROL MUTUALITY:");
}

TEST_CASE("instruction splitting") {
    CHECK(split_sentences("One. Two! Three? Four") == std::vector<std::string>{"One.", "Two!", "Three?", "Four"});
    CHECK(split_sentences("e.g. fine") == std::vector<std::string>{"e.g.", "fine"});
    CHECK(split_sentences("3.5 stars") == std::vector<std::string>{"3.5 stars"});
    CHECK(split_sentences("a\nb.  c") == std::vector<std::string>{"a b.", "c"});
}

TEST_CASE("parsing answers") {
    CHECK(parse("CLUES: a\nREASONING: b\nTRUST: True", Concept::trust) == ParsedAnswer{"a", "b", true});
    CHECK(parse("REASONING: long one\nTRUST: false.", Concept::trust) == ParsedAnswer{"", "long one", false});
    CHECK(parse("TRUST: TRUE", Concept::trust).label);
    CHECK_THROWS_WITH_AS(parse("SATISFACTION: maybe", Concept::satisfaction), "unlabeled continuation", ParseError);
    CHECK_THROWS_AS(parse("CLUES: a\nREASONING: b", Concept::trust), ParseError);
    CHECK_THROWS_AS(parse("CLUES: a\nSATISFACTION: True", Concept::trust), ParseError);
}

TEST_CASE("parse inverts synthesize on 200 random triples") {
    std::mt19937_64 rng(1234);
    std::bernoulli_distribution coin;
    const Concept concepts[] = {Concept::trust, Concept::satisfaction, Concept::commitment, Concept::control_mutuality};
    for (int i = 0; i < 200; ++i) {
        const ParsedAnswer a{random_phrase(rng), random_phrase(rng), coin(rng)};
        const Concept c = concepts[i % 4];
        CHECK(parse(synthesize(a, c, Strategy::cot_cr), c) == a);
        CHECK(parse(synthesize(a, c, Strategy::cot), c) == ParsedAnswer{"", a.reasoning, a.label});
        CHECK(parse(synthesize(a, c, Strategy::vanilla), c) == ParsedAnswer{"", "", a.label});
    }
}

TEST_CASE("template validation and json") {
    const auto pool = fixture_pool();
    auto t = pool.latest(Concept::satisfaction, Strategy::cot_cr);
    CHECK(template_from_json(to_json(t)) == t);
    t.examples[0].clues = " ";
    CHECK_THROWS_WITH(t.validate(), doctest::Contains("no clues"));
    t.strategy = Strategy::cot;
    CHECK_NOTHROW(t.validate());
    t.examples.clear();
    CHECK_THROWS(t.validate());
    CHECK_THROWS_AS(template_from_json(json{{"concept", "trust"}}), ParseError);
}

TEST_CASE("template edits") {
    auto pool = fixture_pool();
    const auto& v1 = pool.latest(Concept::satisfaction, Strategy::cot_cr);
    CHECK(v1.version == 1);

    SUBCASE("identity edit bumps the version with an empty diff") {
        const auto r = edit_template(v1, TemplateEdit{});
        CHECK(r.updated.version == 2);
        CHECK(r.diff.empty());
    }
    SUBCASE("deleting the only example is refused") {
        TemplateEdit e;
        e.examples = std::vector<FewShotExample>{};
        CHECK_THROWS(edit_template(v1, e));
        CHECK_THROWS(pool.edit(Concept::satisfaction, Strategy::cot_cr, e));
        CHECK(pool.latest(Concept::satisfaction, Strategy::cot_cr).version == 1);
    }
    SUBCASE("the negation edit") {
        const auto r = pool.edit(Concept::satisfaction, Strategy::cot_cr, fixture_edit("satisfaction_negation"));
        CHECK(r.updated.version == 2);
        CHECK(pool.latest(Concept::satisfaction, Strategy::cot_cr).version == 2);
        CHECK(pool.get(Concept::satisfaction, Strategy::cot_cr, 1).version == 1);
        REQUIRE_FALSE(r.diff.empty());
        bool added = false;
        for (const auto& h : r.diff) added |= h.new_text.find("games and office typing") != std::string::npos;
        CHECK(added);
        const std::string before = render_template(pool.get(Concept::satisfaction, Strategy::cot_cr, 1));
        const std::string after = render_template(r.updated);
        for (const auto& h : r.diff) {
            CHECK(before.substr(h.old_begin, h.old_end - h.old_begin) == h.old_text);
            CHECK(after.substr(h.new_begin, h.new_end - h.new_begin) == h.new_text);
        }
        CHECK_THROWS(pool.get(Concept::satisfaction, Strategy::cot_cr, 3));
        CHECK(TemplatePool::from_json(pool.to_json()).all() == pool.all());
    }
    CHECK_THROWS_AS(template_edit_from_json(json{{"examples", 3}}), ParseError);
}

TEST_CASE("word diff") {
    CHECK(word_diff("a b c", "a b c").empty());
    const auto d = word_diff("a b c", "a x c d");
    REQUIRE(d.size() == 2);
    CHECK(d[0].old_text == "b");
    CHECK(d[0].new_text == "x");
    CHECK(d[1].old_text.empty());
    CHECK(d[1].new_text == "d");
}

TEST_CASE("assess against the scripted model") {
    const auto pool = fixture_pool();
    const auto llm = ScriptedLanguageModel::from_file(fixtures::path("mock/script.json"));
    SentenceRecord rec{.id = 57, .text = kNegation};
    const auto r = assess(rec, Concept::satisfaction, pool.latest(Concept::satisfaction, Strategy::cot_cr), llm);
    CHECK_FALSE(r.label);
    CHECK(r.clues.find("doesn't bother it too much") != std::string::npos);
    CHECK(rec.llm_label[Concept::satisfaction] == std::optional<bool>(false));
    CHECK(r.transcript.size() == 12);
    CHECK(r.template_version == 1);

    SentenceRecord other{.id = 1, .text = "not in the script"};
    CHECK_THROWS(assess(other, Concept::satisfaction, pool.latest(Concept::satisfaction, Strategy::cot_cr), llm));
    CHECK_FALSE(other.llm_label[Concept::satisfaction].has_value());
    CHECK_THROWS(assess(rec, Concept::trust, pool.latest(Concept::satisfaction, Strategy::cot_cr), llm));
}

TEST_CASE("batch re-assessment") {
    Dataset ds = load(fixtures::path("reassess/dataset.json"));
    const auto pool = fixture_pool();
    const auto& t = pool.latest(Concept::commitment, Strategy::cot_cr);
    const json script = fixtures::json_file("mock/script.json");

    std::size_t flips = 0;
    for (const auto& r : ds.records) {
        const auto label = scripted_label(script, assemble(t, r.text).text, "COMMITMENT:");
        REQUIRE(label.has_value());
        flips += *label != r.llm_label[Concept::commitment];
    }
    CHECK(flips == 7);

    const auto llm = ScriptedLanguageModel::from_file(fixtures::path("mock/script.json"));
    const auto ids = scope_ids(ds, Scope::all, {});
    CHECK(ids.size() == 20);
    std::vector<std::size_t> seen;
    ReassessOptions opt;
    opt.parallelism = 4;
    opt.progress = [&](std::size_t done, std::size_t) { seen.push_back(done); };
    const Dataset before = ds;
    const auto report = reassess_all(ds, ids, Concept::commitment, t, llm, opt);
    CHECK(report.rows.size() == 20);
    CHECK(report.changed_count() == flips);
    CHECK(report.error_count() == 0);
    CHECK(seen.size() == 20);
    CHECK(seen.back() == 20);
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        CHECK(report.rows[i].id == static_cast<std::int64_t>(i));
        CHECK(report.rows[i].old_label == before.records[i].llm_label[Concept::commitment]);
        CHECK(ds.records[i].llm_label[Concept::commitment] == report.rows[i].new_label);
    }

    SUBCASE("serial run gives the same report") {
        Dataset again = before;
        opt.parallelism = 1;
        const auto serial = reassess_all(again, ids, Concept::commitment, t, llm, opt);
        CHECK(serial.changed_count() == report.changed_count());
        CHECK(again == ds);
    }
    SUBCASE("scopes") {
        ds.records[3].excluded = true;
        CHECK(scope_ids(ds, Scope::filtered_subset, {5, 3, 5, 999, 1}) == std::vector<std::int64_t>{1, 5});
        CHECK(scope_ids(ds, Scope::all, {}).size() == 19);
        const auto empty = reassess_all(ds, {}, Concept::commitment, t, llm);
        CHECK(empty.rows.empty());
        CHECK(empty.changed_count() == 0);
        CHECK(parse_scope("filtered_subset") == Scope::filtered_subset);
        CHECK_THROWS(parse_scope("some"));
    }
    SUBCASE("failures stay in the report") {
        ds.records[2].text = "unscripted text";
        const auto kept = ds.records[2].llm_label[Concept::commitment];
        const auto r = reassess_all(ds, ids, Concept::commitment, t, llm);
        CHECK(r.error_count() == 1);
        CHECK(r.rows[2].error.find("unscripted") != std::string::npos);
        CHECK(ds.records[2].llm_label[Concept::commitment] == kept);
    }
}
