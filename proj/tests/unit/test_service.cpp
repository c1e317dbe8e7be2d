#include "opra/pipeline.hpp"
#include "opra/service.hpp"

#include "../support/fixtures.hpp"

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <set>
#include <thread>

using namespace opra;
using nlohmann::json;

namespace {

std::vector<std::int64_t> ids_of(const json& arr) {
    std::vector<std::int64_t> out;
    for (const auto& v : arr) out.push_back(v.get<std::int64_t>());
    return out;
}

json edit_body(const std::string& name) { return fixtures::json_file("templates/edits/" + name + ".json"); }

/// A workspace over a copy of a fixture dataset, persisted into a temp dir.
struct Bench {
    fixtures::TempDir tmp;
    std::unique_ptr<Workspace> ws;

    explicit Bench(const std::string& dataset_rel, bool with_embeddings = false) {
        Dataset ds = load(fixtures::path(dataset_rel));
        if (with_embeddings) embed_all(ds, ReferenceEmbedder(32));
        save(ds, tmp / "dataset.json");
        std::filesystem::copy_file(fixtures::path("templates/pool.json"), tmp / "templates.json");
        const ServiceConfig cfg = parse_config("dataset = dataset.json\n"
                                               "templates = templates.json\n"
                                               "mock_script = " +
                                                   fixtures::path("mock/script.json").string() +
                                                   "\n"
                                                   "tsne.iterations = 250\n"
                                                   "reassess.parallelism = 3\n",
                                               tmp.path());
        ws = Workspace::from_config(cfg);
    }
};

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = parse_config("# comment\n"
                                  "dataset = data/ds.json   # trailing\n"
                                  "gravity.gamma = 0.5\n"
                                  "tsne.perplexity = 12\n"
                                  "clouds.keep = no, not\n"
                                  "strategy = cot\n"
                                  "server.port = 9001\n",
                                  "/base");
    CHECK(cfg.dataset_store == std::filesystem::path("/base/data/ds.json"));
    CHECK(cfg.gravity.gamma == 0.5);
    CHECK(cfg.gravity.alpha_base == 2.0);
    CHECK(cfg.tsne.perplexity == 12.0);
    CHECK(cfg.clouds.keep_list == std::set<std::string>{"no", "not"});
    CHECK(cfg.strategy == Strategy::cot);
    CHECK(cfg.port == 9001);
    CHECK_THROWS_AS(parse_config("bogus.key = 1\n"), ParseError);
    CHECK_THROWS(parse_config("gravity.gamma = 1.5\n"));
    CHECK_THROWS(parse_config("gravity.g = abc\n"));
    CHECK_THROWS(parse_config("just a line\n"));
}

TEST_CASE("environment overrides pick remote providers") {
    ServiceConfig cfg;
    ::setenv("OPRA_EMBED_URL", "http://127.0.0.1:1", 1);
    ::setenv("OPRA_LLM_URL", "http://127.0.0.1:2", 1);
    apply_env_overrides(cfg);
    ::unsetenv("OPRA_EMBED_URL");
    ::unsetenv("OPRA_LLM_URL");
    CHECK(cfg.embed_provider == "remote");
    CHECK(cfg.embed_url == "http://127.0.0.1:1");
    CHECK(cfg.llm_provider == "remote");
    CHECK(cfg.llm_url == "http://127.0.0.1:2");
    CHECK(make_embedder(cfg) != nullptr);

    ServiceConfig plain;
    apply_env_overrides(plain);
    CHECK(plain.embed_provider == "reference");
    CHECK(make_embedder(plain)->embed("hello there").size() == plain.embed_dim);
}

TEST_CASE("filter on the Amazon fixture returns the stored low band") {
    Bench b("amazon/dataset.json");
    const json expected = fixtures::json_file("amazon/filter_satisfaction_0_0.3.json");
    const auto want = ids_of(expected["ids"]);
    REQUIRE(want.size() == 41);

    const auto r = b.ws->put_filter({{"concept", "satisfaction"}, {"coc_min", 0.0}, {"coc_max", 0.3}});
    CHECK(r["count"] == 41);
    CHECK(b.ws->filtered_ids() == want);
    CHECK(b.ws->get_filter()["concept"] == "satisfaction");

    const auto table = b.ws->get_table("coc", false, false);
    REQUIRE(table["rows"].size() == 41);
    double last = -1;
    std::size_t mismatches = 0;
    for (const auto& row : table["rows"]) {
        CHECK(row["coc"].get<double>() >= last);
        last = row["coc"];
        mismatches += row["mismatch"].get<bool>();
    }
    CHECK(mismatches == expected["v1_mismatch_ids"].size());

    CHECK_THROWS_AS(b.ws->put_filter({{"concept", "trust"}, {"coc_min", 0.6}, {"coc_max", 0.2}}), HttpError);
    CHECK(b.ws->filter().concept_id == Concept::satisfaction);
    try {
        b.ws->get_table("colour", false, false);
        FAIL("expected 400");
    } catch (const HttpError& e) {
        CHECK(e.status() == 400);
    }
}

TEST_CASE("layout is shared across concepts and lives in the unit disk") {
    Bench b("google/dataset.json", true);
    const auto a = b.ws->get_layout(Concept::trust, HistogramScale::linear, std::nullopt);
    const auto c = b.ws->get_layout(Concept::commitment, HistogramScale::log10, 5);
    REQUIRE(a["points"].size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(a["points"][i]["x"] == c["points"][i]["x"]);
        CHECK(a["points"][i]["y"] == c["points"][i]["y"]);
        const double x = a["points"][i]["x"], y = a["points"][i]["y"];
        CHECK(std::hypot(x, y) <= 1.0 + 1e-9);
    }
    CHECK(a["concept"] == "trust");
    CHECK(a["histogram"]["bars"].size() == 20);
    CHECK(c["histogram"]["bars"].size() == 5);
    std::size_t total = 0;
    for (const auto& bar : a["histogram"]["bars"]) total += bar["count"].get<std::size_t>();
    CHECK(total == 100);

    SUBCASE("excluding a sentence drops it from the layout and persists") {
        const auto r = b.ws->post_exclude({{"id", 4}});
        CHECK(r["active"] == 99);
        CHECK(b.ws->get_layout(std::nullopt, HistogramScale::linear, std::nullopt)["points"].size() == 99);
        CHECK(load(b.tmp / "dataset.json").records[4].excluded);
        CHECK(b.ws->get_table("id", false, false)["rows"].size() == 99);
        CHECK(b.ws->get_table("id", false, true)["rows"].size() == 100);
        CHECK_THROWS_AS(b.ws->post_exclude({{"id", 4000}}), HttpError);
    }
}

TEST_CASE("layout without embeddings is a conflict") {
    Bench b("imdb/dataset.json");
    try {
        b.ws->get_layout(std::nullopt, HistogramScale::linear, std::nullopt);
        FAIL("expected 409");
    } catch (const HttpError& e) {
        CHECK(e.status() == 409);
    }
}

TEST_CASE("negation scenario: edit the example, re-assess the band") {
    Bench b("amazon/dataset.json");
    const json expected = fixtures::json_file("amazon/filter_satisfaction_0_0.3.json");
    const std::int64_t neg = expected["negation_id"];
    b.ws->put_filter({{"concept", "satisfaction"}, {"coc_min", 0.0}, {"coc_max", 0.3}});

    const auto first = b.ws->post_assess({{"sentence", neg}, {"concept", "satisfaction"}});
    CHECK(first["label"] == false);
    CHECK(first["clues"].get<std::string>().find("doesn't bother it too much") != std::string::npos);

    const auto why = b.ws->get_reasoning(neg, Concept::satisfaction, std::nullopt);
    CHECK(why["available"] == true);
    CHECK(why["audit"]["generated_id"] == 10);
    std::optional<std::int64_t> top;
    for (const auto& inf : why["audit"]["influences"])
        if (inf["rank"] == 1) top = inf["id"];
    CHECK(top == 9);
    CHECK(why["audits"].size() == 3);

    const auto edited = b.ws->post_template_edit(edit_body("satisfaction_negation"));
    CHECK(edited["version"] == 2);
    CHECK_FALSE(edited["diff"].empty());
    CHECK(TemplatePool::load(b.tmp / "templates.json").latest(Concept::satisfaction, Strategy::cot_cr).version == 2);
    CHECK(b.ws->get_template(Concept::satisfaction, Strategy::cot_cr, 1)["latest"] == 2);

    const auto job = b.ws->post_reassess({{"concept", "satisfaction"}, {"scope", "filtered_subset"}});
    const auto done = b.ws->wait_job(job["id"]);
    REQUIRE(done.status == JobStatus::done);
    REQUIRE(done.report.has_value());
    CHECK(done.completed == 41);
    CHECK(done.report->rows.size() == 41);
    CHECK(done.report->error_count() == 0);
    CHECK(done.report->changed_count() == expected["v1_mismatch_ids"].size());

    const Dataset after = b.ws->dataset();
    CHECK(after.find(neg)->llm_label[Concept::satisfaction] == std::optional<bool>(true));
    for (auto id : b.ws->filtered_ids())
        CHECK(after.find(id)->llm_label[Concept::satisfaction] == after.find(id)->expert_label[Concept::satisfaction]);
    CHECK(load(b.tmp / "dataset.json").find(neg)->llm_label[Concept::satisfaction] == std::optional<bool>(true));
    CHECK(b.ws->get_reasoning(neg, Concept::satisfaction, 11)["assessment"]["label"] == true);
}

TEST_CASE("sentiment-bias scenario: the trust label flips") {
    Bench b("google/dataset.json");
    const std::int64_t id = 23;
    CHECK(b.ws->post_assess({{"sentence", id}, {"concept", "trust"}})["label"] == true);
    b.ws->post_template_edit(edit_body("trust_sentiment_bias"));
    CHECK(b.ws->post_assess({{"sentence", id}, {"concept", "trust"}})["label"] == false);
    CHECK(b.ws->dataset().find(id)->llm_label[Concept::trust] == std::optional<bool>(false));

    json bad = edit_body("trust_sentiment_bias");
    bad["edit"]["examples"] = json::array();
    try {
        b.ws->post_template_edit(bad);
        FAIL("expected 422");
    } catch (const HttpError& e) {
        CHECK(e.status() == 422);
    }
    CHECK_THROWS_AS(b.ws->post_assess({{"sentence", 3}, {"concept", "trust"}}), Error);
    CHECK(b.ws->dataset().find(3)->llm_label[Concept::trust] == load(b.tmp / "dataset.json").find(3)->llm_label[Concept::trust]);
}

TEST_CASE("jobs run one at a time in order") {
    Bench b("reassess/dataset.json");
    const auto before = b.ws->dataset();
    const auto j1 = b.ws->post_reassess({{"concept", "commitment"}, {"scope", "all"}});
    const auto j2 = b.ws->post_reassess({{"concept", "commitment"}, {"scope", "all"}});
    CHECK(j2["id"].get<std::int64_t>() == j1["id"].get<std::int64_t>() + 1);
    const auto d1 = b.ws->wait_job(j1["id"]);
    const auto d2 = b.ws->wait_job(j2["id"]);
    REQUIRE(d1.status == JobStatus::done);
    REQUIRE(d2.status == JobStatus::done);
    CHECK(d1.report->changed_count() == 7);
    // the second job sees the first job's labels
    CHECK(d2.report->changed_count() == 0);
    CHECK(d2.total == 20);

    SUBCASE("an empty scope finishes with nothing to do") {
        b.ws->put_filter({{"concept", "commitment"}, {"coc_min", 0.2}, {"coc_max", 0.4}});
        const auto j = b.ws->post_reassess({{"concept", "commitment"}});
        CHECK(j["progress"]["total"] == 0);
        const auto d = b.ws->wait_job(j["id"]);
        CHECK(d.status == JobStatus::done);
        CHECK(d.completed == 0);
        CHECK(d.report->rows.empty());
    }
    CHECK_THROWS_AS(b.ws->get_job(999), HttpError);
    CHECK_THROWS_AS(b.ws->post_reassess({{"concept", "control_mutuality"}}), HttpError);
}

TEST_CASE("HTTP routes") {
    Bench b("google/dataset.json", true);
    httplib::Server server;
    register_routes(server, *b.ws);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);
    auto body = [](const httplib::Result& r) { return json::parse(r->body); };

    auto r = client.Get("/health");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(body(r)["status"] == "ok");

    r = client.Get("/layout?concept=trust&scale=log2&bins=4");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(body(r)["histogram"]["bars"].size() == 4);
    CHECK(client.Get("/layout?scale=cubic")->status == 400);

    r = client.Put("/filter", R"({"concept": "trust", "coc_min": 0, "coc_max": 1})", "application/json");
    CHECK(r->status == 200);
    CHECK(body(r)["count"] == 100);
    CHECK(client.Put("/filter", R"({"concept": "trust", "coc_min": 2})", "application/json")->status == 400);
    CHECK(client.Put("/filter", "not json", "application/json")->status == 400);
    CHECK(body(client.Get("/filter"))["concept"] == "trust");

    CHECK(client.Get("/table?sort=text&order=desc")->status == 200);
    CHECK(client.Get("/table?sort=nope")->status == 400);
    CHECK(client.Post("/table/exclude", R"({"id": 99999})", "application/json")->status == 404);

    r = client.Get("/clouds?concept=trust&selected=1,2");
    CHECK(r->status == 200);
    CHECK(body(r).contains("true"));
    CHECK(client.Get("/clouds")->status == 400);

    CHECK(client.Get("/reasoning?sentence=23&concept=trust")->status == 404);
    r = client.Post("/assess", R"({"sentence": 23, "concept": "trust"})", "application/json");
    CHECK(r->status == 200);
    CHECK(body(r)["label"] == true);
    r = client.Get("/reasoning?sentence=23&concept=trust");
    CHECK(r->status == 200);
    CHECK(body(r)["audit"]["generated_id"] == 10);
    CHECK(client.Get("/reasoning?sentence=23&concept=trust&generated=3")->status == 400);

    CHECK(client.Get("/template?concept=trust")->status == 200);
    CHECK(client.Get("/template?concept=control_mutuality")->status == 404);
    CHECK(client.Post("/template/edit", R"({"concept": "trust", "edit": {"examples": []}})", "application/json")->status ==
          422);
    r = client.Post("/template/edit", edit_body("trust_sentiment_bias").dump(), "application/json");
    CHECK(r->status == 200);
    CHECK(body(r)["version"] == 2);

    r = client.Post("/reassess", R"({"concept": "commitment", "scope": "filtered_subset"})", "application/json");
    CHECK(r->status == 202);
    const auto job = body(r)["id"].get<std::int64_t>();
    b.ws->wait_job(job);
    r = client.Get("/job/" + std::to_string(job));
    CHECK(r->status == 200);
    CHECK(body(r)["status"] == "done");
    CHECK(client.Get("/job/4242")->status == 404);

    server.stop();
    thread.join();
}
