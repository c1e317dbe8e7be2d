#include "opra/providers.hpp"

#include "opra/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace opra {

using nlohmann::json;

namespace {

void require_text(std::string_view text, const char* what) {
    if (text::trim(text).empty()) throw Error(std::string(what) + ": empty text");
}

struct Endpoint {
    std::string host;  // scheme://host:port
    std::string path_prefix;
};

Endpoint split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = url.find('/', host_start);
    if (slash == std::string::npos) return {url, ""};
    std::string prefix = url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, slash), prefix};
}

json post_json(const std::string& base_url, const std::string& route, const json& body) {
    const Endpoint ep = split_url(base_url);
    const std::string endpoint = base_url + route;
    httplib::Client client(ep.host);
    client.set_connection_timeout(5);
    client.set_read_timeout(120);
    auto res = client.Post(ep.path_prefix + route, body.dump(), "application/json");
    if (!res) throw TransportError(endpoint, "request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw TransportError(endpoint, "HTTP " + std::to_string(res->status) + ": " + res->body);
    try {
        return json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw TransportError(endpoint, std::string("invalid JSON response: ") + e.what());
    }
}

double unit_uniform(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

const std::vector<std::string>& default_positive() {
    static const std::vector<std::string> words{
        "good", "great", "excellent", "love", "loved", "amazing", "awesome", "happy", "perfect", "easy", "nice",
        "fantastic", "wonderful", "best", "recommend", "comfortable", "reliable", "sturdy", "smooth", "fast",
        "friendly", "helpful", "satisfied", "enjoy", "pleased", "solid", "quality", "durable", "responsive",
        "quiet", "beautiful", "glad", "worth", "honest", "fair", "transparent", "loyal", "convenient",
        "impressive", "superb", "brilliant", "delighted", "fun", "favorite", "clean", "fixed", "works",
        "gorgeous", "crisp", "bright", "stunning", "masterpiece", "moving", "polite", "professional"};
    return words;
}

const std::vector<std::string>& default_negative() {
    static const std::vector<std::string> words{
        "bad", "terrible", "awful", "poor", "hate", "worst", "broken", "disappointing", "disappointed", "slow",
        "problem", "issue", "defective", "cheap", "flimsy", "useless", "waste", "horrible", "annoying", "noisy",
        "rude", "difficult", "fail", "failure", "refund", "sticky", "stuck", "unreliable", "wrong", "complaint",
        "angry", "frustrated", "frustrating", "expensive", "dirty", "boring", "mediocre", "junk", "garbage",
        "lag", "laggy", "crash", "unfortunately", "dead", "overpriced", "dull", "late", "ignored", "hidden"};
    return words;
}

std::vector<std::string> stem_all(std::vector<std::string> words) {
    for (auto& w : words) w = text::lemma_lite(w);
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    return words;
}

}  // namespace

std::size_t prompt_token_count(std::string_view prompt) { return text::whitespace_tokens(prompt).size(); }

// ---------------------------------------------------------------- embedders

ReferenceEmbedder::ReferenceEmbedder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
    if (dimension_ == 0) throw Error("embedding dimension must be positive");
}

void ReferenceEmbedder::accumulate(std::string_view token, Embedding& out) const {
    std::mt19937_64 gen(text::fnv1a64(token) ^ seed_);
    for (auto& v : out) v += unit_uniform(gen);
}

Embedding ReferenceEmbedder::embed(std::string_view text) const {
    require_text(text, "embed");
    Embedding out(dimension_, 0.0);
    const auto tokens = text::basic_tokens(text);
    if (tokens.empty()) {
        accumulate(text, out);
    } else {
        for (const auto& t : tokens) accumulate(t, out);
    }
    double norm = 0.0;
    for (double v : out) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& v : out) v /= norm;
    return out;
}

RemoteEmbedder::RemoteEmbedder(std::string base_url, std::size_t dimension, std::string pooling)
    : base_url_(std::move(base_url)), dimension_(dimension), pooling_(std::move(pooling)) {}

Embedding RemoteEmbedder::embed(std::string_view text) const {
    require_text(text, "embed");
    const json res = post_json(base_url_, "/embed", json{{"text", std::string(text)}});
    if (!res.contains("values") || !res["values"].is_array())
        throw TransportError(base_url_ + "/embed", "response has no 'values' array");
    Embedding values;
    try {
        values = res["values"].get<Embedding>();
    } catch (const json::exception& e) {
        throw TransportError(base_url_ + "/embed", std::string("non-numeric embedding: ") + e.what());
    }
    if (values.size() != dimension_)
        throw Error("embedding dimension mismatch: provider returned " + std::to_string(values.size()) +
                    ", configured " + std::to_string(dimension_));
    for (double v : values)
        if (!std::isfinite(v)) throw Error("embedding has non-finite entries");
    return values;
}

// ---------------------------------------------------------------- sentiment

LexiconSentimentClassifier::LexiconSentimentClassifier()
    : LexiconSentimentClassifier(default_positive(), default_negative()) {}

LexiconSentimentClassifier::LexiconSentimentClassifier(std::vector<std::string> positive,
                                                       std::vector<std::string> negative)
    : positive_(stem_all(std::move(positive))), negative_(stem_all(std::move(negative))) {}

SentimentResult LexiconSentimentClassifier::classify(std::string_view text) const {
    require_text(text, "classify_sentiment");
    const auto tokens = text::content_tokens(text);
    if (tokens.empty()) return {SentimentLabel::positive, 0.5, true};
    long score = 0;
    for (const auto& t : tokens) {
        if (std::binary_search(positive_.begin(), positive_.end(), t)) ++score;
        if (std::binary_search(negative_.begin(), negative_.end(), t)) --score;
    }
    SentimentResult r;
    r.label = score >= 0 ? SentimentLabel::positive : SentimentLabel::negative;
    r.probability = 0.5 + std::min(0.5, 0.1 * static_cast<double>(std::labs(score)));
    return r;
}

// ---------------------------------------------------------------- scripted LLM

Matrix scripted_attention(std::string_view full_text, const ScriptEntry& entry) {
    // Tokenize on whitespace, remembering which non-empty line each token is on.
    std::vector<std::size_t> sentence_of;
    std::vector<std::size_t> first_token;
    std::size_t line = 0;
    bool line_has_token = false;
    std::size_t i = 0;
    while (i < full_text.size()) {
        const char c = full_text[i];
        if (c == '\n') {
            if (line_has_token) ++line;
            line_has_token = false;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        while (i < full_text.size() && !std::isspace(static_cast<unsigned char>(full_text[i]))) ++i;
        if (!line_has_token) first_token.push_back(sentence_of.size());
        sentence_of.push_back(line);
        line_has_token = true;
    }

    const std::size_t n = sentence_of.size();
    Matrix att(n, n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t a = sentence_of[t];
        std::vector<std::pair<std::size_t, double>> targeted;
        double planned = 0.0;
        for (const auto& [pair, weight] : entry.attention_plan) {
            if (pair.first != a || pair.second >= first_token.size()) continue;
            const std::size_t src = first_token[pair.second];
            if (src > t || weight <= 0.0) continue;
            targeted.emplace_back(src, weight);
            planned += weight;
        }
        const double scale = planned > 1.0 ? 1.0 / planned : 1.0;
        const double remainder = planned > 1.0 ? 0.0 : 1.0 - planned;
        for (const auto& [src, weight] : targeted) att(t, src) += weight * scale;
        const double uniform = remainder / static_cast<double>(t + 1);
        for (std::size_t s = 0; s <= t; ++s) att(t, s) += uniform;
    }
    return att;
}

ScriptedLanguageModel::ScriptedLanguageModel(std::map<std::string, ScriptEntry> script, std::size_t token_budget)
    : script_(std::move(script)), token_budget_(token_budget) {}

ScriptedLanguageModel ScriptedLanguageModel::from_json(const json& doc, std::size_t token_budget) {
    if (!doc.is_object()) throw ParseError("mock script must be a JSON object keyed by prompt fingerprint");
    std::map<std::string, ScriptEntry> script;
    try {
        for (const auto& [key, value] : doc.items()) {
            ScriptEntry e;
            e.text = value.at("text").get<std::string>();
            if (value.contains("attention_plan")) {
                for (const auto& item : value["attention_plan"]) {
                    const auto& pair = item.at(0);
                    e.attention_plan.push_back(
                        {{pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>()}, item.at(1).get<double>()});
                }
            }
            script.emplace(key, std::move(e));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed mock script: ") + e.what());
    }
    return ScriptedLanguageModel(std::move(script), token_budget);
}

ScriptedLanguageModel ScriptedLanguageModel::from_file(const std::filesystem::path& path, std::size_t token_budget) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open mock script " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("cannot parse mock script " + path.string() + ": " + e.what());
    }
    return from_json(doc, token_budget);
}

json to_json(const std::map<std::string, ScriptEntry>& script) {
    json doc = json::object();
    for (const auto& [key, e] : script) {
        json plan = json::array();
        for (const auto& [pair, w] : e.attention_plan) plan.push_back(json::array({json::array({pair.first, pair.second}), w}));
        doc[key] = {{"text", e.text}, {"attention_plan", plan}};
    }
    return doc;
}

GenerationResult ScriptedLanguageModel::generate(std::string_view prompt) const {
    if (text::trim(prompt).empty()) throw Error("generate: empty prompt");
    const std::size_t tokens = prompt_token_count(prompt);
    if (tokens > token_budget_)
        throw Error("prompt exceeds token budget: " + std::to_string(tokens) + " > " + std::to_string(token_budget_));
    const std::string key = text::fingerprint(prompt);
    const auto it = script_.find(key);
    if (it == script_.end()) throw Error("unscripted prompt (fingerprint " + key + ")");

    GenerationResult result;
    result.text = it->second.text;
    std::string full(prompt);
    full += result.text;
    result.token_texts = text::whitespace_tokens(full);
    result.attention = scripted_attention(full, it->second);
    return result;
}

// ---------------------------------------------------------------- remote LLM

RemoteLanguageModel::RemoteLanguageModel(std::string base_url, std::size_t max_tokens, std::size_t token_budget)
    : base_url_(std::move(base_url)), max_tokens_(max_tokens), token_budget_(token_budget) {}

GenerationResult RemoteLanguageModel::generate(std::string_view prompt) const {
    if (text::trim(prompt).empty()) throw Error("generate: empty prompt");
    const std::size_t tokens = prompt_token_count(prompt);
    if (tokens > token_budget_)
        throw Error("prompt exceeds token budget: " + std::to_string(tokens) + " > " + std::to_string(token_budget_));

    const json res = post_json(base_url_, "/generate", json{{"prompt", std::string(prompt)}, {"max_tokens", max_tokens_}});
    const std::string endpoint = base_url_ + "/generate";
    GenerationResult out;
    try {
        out.text = res.at("text").get<std::string>();
        out.token_texts = res.value("token_texts", std::vector<std::string>{});
        if (res.contains("attention") && !res["attention"].is_null()) {
            const auto rows = res["attention"].get<std::vector<std::vector<double>>>();
            Matrix att(rows.size(), rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != rows.size()) throw TransportError(endpoint, "attention matrix is not square");
                for (std::size_t c = 0; c < rows.size(); ++c) att(r, c) = rows[r][c];
            }
            if (att.rows() != out.token_texts.size())
                throw TransportError(endpoint, "attention dimension does not match token count");
            out.attention = std::move(att);
        }
    } catch (const json::exception& e) {
        throw TransportError(endpoint, std::string("malformed generation response: ") + e.what());
    }
    return out;
}

}  // namespace opra
