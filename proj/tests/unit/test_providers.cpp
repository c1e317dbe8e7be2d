#include "opra/providers.hpp"
#include "opra/text.hpp"

#include "../support/fixtures.hpp"

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <thread>

using namespace opra;
using nlohmann::json;

namespace {

/// Local HTTP server on a free port, stopped on destruction.
struct FakeRemote {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    template <typename Setup>
    explicit FakeRemote(Setup setup) {
        setup(server);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeRemote() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("reference embedder") {
    const ReferenceEmbedder e(768);
    const auto a = e.embed("The keyboard is easy to clean.");
    CHECK(a == e.embed("The keyboard is easy to clean."));
    CHECK(a.size() == 768);
    double n = 0;
    for (double v : a) n += v * v;
    CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-9);
    CHECK(a != e.embed("The mouse is hard to clean."));
    CHECK(ReferenceEmbedder(768, 1).embed("x y") != ReferenceEmbedder(768, 2).embed("x y"));
    CHECK_THROWS(e.embed(""));
}

TEST_CASE("lexicon sentiment") {
    const LexiconSentimentClassifier c;
    const auto great = c.classify("great great product");
    CHECK(great.label == SentimentLabel::positive);
    CHECK(great.probability == doctest::Approx(0.7));
    CHECK_FALSE(great.fallback);
    const auto bad = c.classify("terrible awful");
    CHECK(bad.label == SentimentLabel::negative);
    CHECK(bad.probability >= 0.5);
    const auto none = c.classify("the of and");
    CHECK(none.fallback);
    CHECK(none.label == SentimentLabel::positive);
    CHECK(none.probability == 0.5);
    const LexiconSentimentClassifier custom({"sturdy"}, {"wobbly"});
    CHECK(custom.classify("sturdy sturdy sturdy sturdy sturdy sturdy wobbly").probability == doctest::Approx(1.0));
}

TEST_CASE("scripted model answers the scenario prompts") {
    const auto llm = ScriptedLanguageModel::from_file(fixtures::path("mock/script.json"));
    const std::string prompt = fixtures::read(fixtures::path("prompts/satisfaction_cot_cr.txt"));
    const auto r = llm.generate(prompt);
    CHECK(r.text.find("SATISFACTION: False") != std::string::npos);
    CHECK(r.text.find("doesn't bother it too much") != std::string::npos);
    REQUIRE(r.attention.has_value());
    CHECK(r.attention->rows() == r.token_texts.size());
    for (std::size_t t = 0; t < r.attention->rows(); ++t) {
        double sum = 0;
        for (std::size_t s = 0; s < r.attention->cols(); ++s) {
            CHECK((*r.attention)(t, s) >= 0.0);
            if (s > t) CHECK((*r.attention)(t, s) == 0.0);
            sum += (*r.attention)(t, s);
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
    CHECK_THROWS_WITH(llm.generate("nobody wrote this one"), doctest::Contains("unscripted prompt"));
    CHECK_THROWS_WITH(ScriptedLanguageModel(llm.script(), 5).generate(prompt), doctest::Contains("token budget"));
}

TEST_CASE("scripted attention follows the plan") {
    const std::string full = "a b\nc d e\nf g";
    const ScriptEntry entry{"", {{{2, 0}, 0.5}, {{1, 0}, 2.0}}};
    const Matrix att = scripted_attention(full, entry);
    REQUIRE(att.rows() == 7);
    // token 5 ("f") is the first token of sentence 2: half goes to token 0, the rest is spread over 6 tokens
    CHECK(att(5, 0) == doctest::Approx(0.5 + 0.5 / 6));
    CHECK(att(5, 3) == doctest::Approx(0.5 / 6));
    // overweight plans are renormalized
    CHECK(att(2, 0) == doctest::Approx(1.0));
    CHECK(att(2, 1) == 0.0);
}

TEST_CASE("remote embedder contract") {
    FakeRemote remote([](httplib::Server& s) {
        s.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
            const auto body = json::parse(req.body);
            const std::size_t n = body["text"] == "short" ? 3 : 768;
            res.set_content(json{{"values", std::vector<double>(n, 0.5)}}.dump(), "application/json");
        });
    });
    const RemoteEmbedder e(remote.url(), 768);
    CHECK(e.embed("anything").size() == 768);
    CHECK_THROWS_WITH(e.embed("short"), doctest::Contains("dimension mismatch"));
}

TEST_CASE("unreachable remote reports the endpoint") {
    // nothing listens on port 1 without root
    const std::string url = "http://127.0.0.1:1";
    try {
        RemoteEmbedder(url, 8).embed("hello");
        FAIL("expected a transport error");
    } catch (const TransportError& e) {
        CHECK(e.endpoint().find("/embed") != std::string::npos);
        CHECK(e.endpoint().find(url) == 0);
    }
    CHECK_THROWS_AS(RemoteLanguageModel(url).generate("hello"), TransportError);
}

TEST_CASE("remote language model passes attention through") {
    FakeRemote remote([](httplib::Server& s) {
        s.Post("/generate", [](const httplib::Request& req, httplib::Response& res) {
            const auto body = json::parse(req.body);
            CHECK(body["max_tokens"] == 32);
            res.set_content(json{{"text", " ok"},
                                 {"token_texts", {"hi", "ok"}},
                                 {"attention", {{1.0, 0.0}, {0.4, 0.6}}}}
                                .dump(),
                            "application/json");
        });
    });
    const auto r = RemoteLanguageModel(remote.url(), 32).generate("hi");
    CHECK(r.text == " ok");
    REQUIRE(r.attention.has_value());
    CHECK((*r.attention)(1, 1) == 0.6);
}
