#include "opra/service.hpp"

#include "opra/text.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace opra {

namespace {

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    try {
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ParseError("config " + key + ": not a number: " + v);
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    try {
        if (!v.empty() && v.front() != '-') {
            const auto n = std::stoull(v, &used, 0);
            if (used == v.size()) return n;
        }
    } catch (const std::exception&) {
    }
    throw ParseError("config " + key + ": not a non-negative integer: " + v);
}

}  // namespace

ServiceConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    ServiceConfig cfg;
    auto path = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };

    using Setter = std::function<void(const std::string& key, const std::string& value)>;
    const std::map<std::string, Setter> setters{
        {"dataset", [&](auto&, auto& v) { cfg.dataset_store = path(v); }},
        {"templates", [&](auto&, auto& v) { cfg.template_store = path(v); }},
        {"instructions", [&](auto&, auto& v) { cfg.instructions = path(v); }},
        {"layout", [&](auto&, auto& v) { cfg.layout_store = path(v); }},
        {"mock_script", [&](auto&, auto& v) { cfg.mock_script = path(v); }},
        {"embed.provider", [&](auto&, auto& v) { cfg.embed_provider = v; }},
        {"embed.url", [&](auto&, auto& v) { cfg.embed_url = v; }},
        {"embed.dim", [&](auto& k, auto& v) { cfg.embed_dim = to_unsigned(k, v); }},
        {"embed.seed", [&](auto& k, auto& v) { cfg.embed_seed = to_unsigned(k, v); }},
        {"llm.provider", [&](auto&, auto& v) { cfg.llm_provider = v; }},
        {"llm.url", [&](auto&, auto& v) { cfg.llm_url = v; }},
        {"llm.max_tokens", [&](auto& k, auto& v) { cfg.llm_max_tokens = to_unsigned(k, v); }},
        {"llm.token_budget", [&](auto& k, auto& v) { cfg.llm_token_budget = to_unsigned(k, v); }},
        {"prune.dup_threshold", [&](auto& k, auto& v) { cfg.prune.dup_threshold = to_double(k, v); }},
        {"prune.min_tokens", [&](auto& k, auto& v) { cfg.prune.min_tokens = to_unsigned(k, v); }},
        {"gravity.alpha_base", [&](auto& k, auto& v) { cfg.gravity.alpha_base = to_double(k, v); }},
        {"gravity.g", [&](auto& k, auto& v) { cfg.gravity.g = to_double(k, v); }},
        {"gravity.gamma", [&](auto& k, auto& v) { cfg.gravity.gamma = to_double(k, v); }},
        {"gravity.delta", [&](auto& k, auto& v) { cfg.gravity.delta = to_double(k, v); }},
        {"gravity.eps1", [&](auto& k, auto& v) { cfg.gravity.eps1 = to_double(k, v); }},
        {"gravity.eps2", [&](auto& k, auto& v) { cfg.gravity.eps2 = to_double(k, v); }},
        {"gravity.max_iters", [&](auto& k, auto& v) { cfg.gravity.max_iters = to_unsigned(k, v); }},
        {"gravity.tol", [&](auto& k, auto& v) { cfg.gravity.tol = to_double(k, v); }},
        {"tsne.perplexity", [&](auto& k, auto& v) { cfg.tsne.perplexity = to_double(k, v); }},
        {"tsne.iterations", [&](auto& k, auto& v) { cfg.tsne.iterations = to_unsigned(k, v); }},
        {"tsne.learning_rate", [&](auto& k, auto& v) { cfg.tsne.learning_rate = to_double(k, v); }},
        {"tsne.exaggeration", [&](auto& k, auto& v) { cfg.tsne.exaggeration = to_double(k, v); }},
        {"tsne.exaggeration_iters", [&](auto& k, auto& v) { cfg.tsne.exaggeration_iters = to_unsigned(k, v); }},
        {"tsne.seed", [&](auto& k, auto& v) { cfg.tsne.seed = to_unsigned(k, v); }},
        {"histogram.bins", [&](auto& k, auto& v) { cfg.histogram_bins = to_unsigned(k, v); }},
        {"clouds.top_n", [&](auto& k, auto& v) { cfg.clouds.top_n = to_unsigned(k, v); }},
        {"clouds.keep",
         [&](auto&, auto& v) {
             std::stringstream ss(v);
             std::string word;
             while (std::getline(ss, word, ','))
                 if (auto w = text::trim(word); !w.empty()) cfg.clouds.keep_list.insert(w);
         }},
        {"reassess.parallelism", [&](auto& k, auto& v) { cfg.reassess_parallelism = to_unsigned(k, v); }},
        {"strategy", [&](auto&, auto& v) { cfg.strategy = parse_strategy(v); }},
        {"server.host", [&](auto&, auto& v) { cfg.host = v; }},
        {"server.port", [&](auto& k, auto& v) { cfg.port = static_cast<int>(to_unsigned(k, v)); }},
    };

    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = text::trim(trimmed.substr(0, eq));
        const std::string value = text::trim(trimmed.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) throw ParseError("config line " + std::to_string(line_no) + ": unknown key " + key);
        it->second(key, value);
    }
    cfg.gravity.validate();
    return cfg;
}

ServiceConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

void apply_env_overrides(ServiceConfig& cfg) {
    if (const char* url = std::getenv("OPRA_EMBED_URL"); url && *url) {
        cfg.embed_provider = "remote";
        cfg.embed_url = url;
    }
    if (const char* url = std::getenv("OPRA_LLM_URL"); url && *url) {
        cfg.llm_provider = "remote";
        cfg.llm_url = url;
    }
}

std::unique_ptr<Embedder> make_embedder(const ServiceConfig& cfg) {
    if (cfg.embed_provider == "reference") return std::make_unique<ReferenceEmbedder>(cfg.embed_dim, cfg.embed_seed);
    if (cfg.embed_provider == "remote") {
        if (cfg.embed_url.empty()) throw Error("embed.provider = remote needs embed.url");
        return std::make_unique<RemoteEmbedder>(cfg.embed_url, cfg.embed_dim);
    }
    throw Error("unknown embed.provider: " + cfg.embed_provider);
}

std::unique_ptr<LanguageModel> make_language_model(const ServiceConfig& cfg) {
    if (cfg.llm_provider == "mock") {
        if (cfg.mock_script.empty()) throw Error("llm.provider = mock needs mock_script");
        return std::make_unique<ScriptedLanguageModel>(
            ScriptedLanguageModel::from_file(cfg.mock_script, cfg.llm_token_budget));
    }
    if (cfg.llm_provider == "remote") {
        if (cfg.llm_url.empty()) throw Error("llm.provider = remote needs llm.url");
        return std::make_unique<RemoteLanguageModel>(cfg.llm_url, cfg.llm_max_tokens, cfg.llm_token_budget);
    }
    throw Error("unknown llm.provider: " + cfg.llm_provider);
}

}  // namespace opra
