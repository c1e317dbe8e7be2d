// Command-line front end for the OPRA pipeline.

#include "opra/aggregation.hpp"
#include "opra/coc.hpp"
#include "opra/corpus.hpp"
#include "opra/eval.hpp"
#include "opra/layout.hpp"
#include "opra/pipeline.hpp"
#include "opra/prompting.hpp"
#include "opra/providers.hpp"
#include "opra/service.hpp"
#include "opra/text.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace opra;
using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, std::string_view content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << content;
}

struct Common {
    std::string config;
    std::string store;

    ServiceConfig service_config() const {
        ServiceConfig cfg = config.empty() ? ServiceConfig{} : load_config(config);
        if (!store.empty()) cfg.dataset_store = store;
        apply_env_overrides(cfg);
        return cfg;
    }
};

void add_common(CLI::App* cmd, Common& c, bool store_required = true) {
    cmd->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
    auto* opt = cmd->add_option("--store", c.store, "dataset store (JSON)");
    if (store_required) opt->required();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OPRA labeling and audit pipeline"};
    app.require_subcommand(1);

    // ingest
    std::string ingest_path, ingest_format = "jsonl", ingest_source = "other", ingest_out;
    auto* ingest_cmd = app.add_subcommand("ingest", "read a csv/jsonl file into a dataset store");
    ingest_cmd->add_option("path", ingest_path)->required()->check(CLI::ExistingFile);
    ingest_cmd->add_option("--format", ingest_format)->check(CLI::IsMember({"jsonl", "csv"}));
    ingest_cmd->add_option("--source", ingest_source)->check(CLI::IsMember({"amazon", "google", "imdb", "other"}));
    ingest_cmd->add_option("--out", ingest_out)->required();

    // prune
    Common prune_c;
    std::optional<double> dup_threshold;
    std::optional<std::size_t> min_tokens;
    auto* prune_cmd = app.add_subcommand("prune", "exclude near duplicates and uninformative sentences");
    add_common(prune_cmd, prune_c);
    prune_cmd->add_option("--dup-threshold", dup_threshold);
    prune_cmd->add_option("--min-tokens", min_tokens);

    // embed
    Common embed_c;
    bool embed_force = false;
    auto* embed_cmd = app.add_subcommand("embed", "embed every active sentence");
    add_common(embed_cmd, embed_c);
    embed_cmd->add_flag("--force", embed_force, "re-embed sentences that already have a vector");

    // sentiment
    Common sent_c;
    auto* sent_cmd = app.add_subcommand("sentiment", "classify sentence sentiment with the lexicon classifier");
    add_common(sent_cmd, sent_c);

    // coc
    Common coc_c;
    std::string coc_instructions;
    auto* coc_cmd = app.add_subcommand("coc", "compute raw and scaled certainty of concepts");
    add_common(coc_cmd, coc_c);
    coc_cmd->add_option("--instructions", coc_instructions, "expert instruction file (overrides config)");

    // layout
    Common layout_c;
    std::string layout_out, layout_svg;
    auto* layout_cmd = app.add_subcommand("layout", "t-SNE projection followed by the gravity model");
    add_common(layout_cmd, layout_c);
    layout_cmd->add_option("--out", layout_out)->required();
    layout_cmd->add_option("--svg", layout_svg, "also write an SVG scatter");

    // assess
    Common assess_c;
    std::string assess_concept, assess_strategy = "cot_cr", assess_scope = "all", assess_templates, assess_report;
    std::vector<std::int64_t> assess_ids;
    double assess_min = 0.0, assess_max = 1.0;
    auto* assess_cmd = app.add_subcommand("assess", "label sentences with the language model");
    add_common(assess_cmd, assess_c);
    assess_cmd->add_option("--concept", assess_concept)->required();
    assess_cmd->add_option("--strategy", assess_strategy)->check(CLI::IsMember({"vanilla", "cot", "cot_cr"}));
    assess_cmd->add_option("--scope", assess_scope)->check(CLI::IsMember({"all", "filtered_subset"}));
    assess_cmd->add_option("--coc-min", assess_min, "filter lower bound for filtered_subset");
    assess_cmd->add_option("--coc-max", assess_max, "filter upper bound for filtered_subset");
    assess_cmd->add_option("--id", assess_ids, "assess only these sentence ids");
    assess_cmd->add_option("--templates", assess_templates, "template store (overrides config)");
    assess_cmd->add_option("--report", assess_report, "write the report JSON here");

    // eval
    std::string eval_expert;
    std::vector<std::string> eval_predictions;
    bool eval_json = false;
    auto* eval_cmd = app.add_subcommand("eval", "score prediction sets against expert labels");
    eval_cmd->add_option("--expert", eval_expert, "dataset store with expert labels")->required();
    eval_cmd->add_option("predictions", eval_predictions)->required()->check(CLI::ExistingFile);
    eval_cmd->add_flag("--json", eval_json);

    // serve
    std::string serve_config;
    std::string serve_host;
    int serve_port = 0;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
    serve_cmd->add_option("--config", serve_config)->required()->check(CLI::ExistingFile);
    serve_cmd->add_option("--host", serve_host);
    serve_cmd->add_option("--port", serve_port);

    // prompt
    std::string prompt_template, prompt_text;
    auto* prompt_cmd = app.add_subcommand("prompt", "print the assembled prompt for one sentence");
    prompt_cmd->add_option("--template", prompt_template)->required()->check(CLI::ExistingFile);
    prompt_cmd->add_option("--text", prompt_text)->required();

    // fingerprint
    std::string fp_file;
    auto* fp_cmd = app.add_subcommand("fingerprint", "print the scripted-model key of a prompt file");
    fp_cmd->add_option("file", fp_file)->required()->check(CLI::ExistingFile);

    // mock-script
    std::string ms_scenario, ms_out, ms_templates, ms_store;
    std::vector<std::string> ms_edits;
    auto* ms_cmd = app.add_subcommand("mock-script", "build a scripted-model file from a scenario");
    ms_cmd->add_option("scenario", ms_scenario)->required()->check(CLI::ExistingFile);
    ms_cmd->add_option("--templates", ms_templates, "template store")->required()->check(CLI::ExistingFile);
    ms_cmd->add_option("--store", ms_store, "dataset store for entries naming a sentence id")->check(CLI::ExistingFile);
    ms_cmd->add_option("--edit", ms_edits, "template edit applied to the store first, in order")->check(CLI::ExistingFile);
    ms_cmd->add_option("--out", ms_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest_cmd) {
            Dataset ds = ingest(ingest_path, parse_format(ingest_format), parse_source(ingest_source));
            save(ds, ingest_out);
            std::cout << "ingested " << ds.records.size() << " sentences\n";
        } else if (*prune_cmd) {
            ServiceConfig cfg = prune_c.service_config();
            if (dup_threshold) cfg.prune.dup_threshold = *dup_threshold;
            if (min_tokens) cfg.prune.min_tokens = *min_tokens;
            PruneResult r = prune_uninformative(load(cfg.dataset_store), cfg.prune);
            save(r.dataset, cfg.dataset_store);
            for (const auto& rm : r.report.removals)
                std::cout << rm.id << '\t' << prune_rule_name(rm.rule) << '\t' << rm.value << '\n';
            std::cout << "excluded " << r.report.removals.size() << " of " << r.report.considered << '\n';
        } else if (*embed_cmd) {
            const ServiceConfig cfg = embed_c.service_config();
            Dataset ds = load(cfg.dataset_store);
            const auto embedder = make_embedder(cfg);
            const std::size_t n = embed_all(ds, *embedder, embed_force);
            save(ds, cfg.dataset_store);
            std::cout << "embedded " << n << " sentences\n";
        } else if (*sent_cmd) {
            const ServiceConfig cfg = sent_c.service_config();
            Dataset ds = load(cfg.dataset_store);
            const std::size_t fallback = classify_all(ds, LexiconSentimentClassifier{});
            save(ds, cfg.dataset_store);
            std::cout << "classified " << ds.active_count() << " sentences (" << fallback << " by fallback)\n";
        } else if (*coc_cmd) {
            ServiceConfig cfg = coc_c.service_config();
            if (!coc_instructions.empty()) cfg.instructions = coc_instructions;
            if (cfg.instructions.empty()) throw Error("coc needs --instructions or an instructions config key");
            Dataset ds = load(cfg.dataset_store);
            const auto embedder = make_embedder(cfg);
            const auto specs = load_instructions(cfg.instructions, *embedder);
            const CoCMatrix m = compute_coc(ds, specs);
            save(ds, cfg.dataset_store);
            std::cout << "scored " << m.ids.size() << " sentences on " << m.concepts.size() << " concepts\n";
        } else if (*layout_cmd) {
            const ServiceConfig cfg = layout_c.service_config();
            const Dataset ds = load(cfg.dataset_store);
            const auto geom = OctagonGeometry::standard();
            const Layout layout = compute_layout(ds, geom, cfg.gravity, cfg.tsne);
            write_file(layout_out, to_json(layout, geom).dump(2));
            if (!layout_svg.empty()) write_file(layout_svg, to_svg(layout, geom));
            std::cout << layout.points.size() << " points, " << layout.iterations << " gravity iterations"
                      << (layout.converged ? "" : " (not converged)") << '\n';
        } else if (*assess_cmd) {
            ServiceConfig cfg = assess_c.service_config();
            if (!assess_templates.empty()) cfg.template_store = assess_templates;
            const Concept c = require_concept(assess_concept);
            const Strategy s = parse_strategy(assess_strategy);
            Dataset ds = load(cfg.dataset_store);
            const TemplatePool pool = TemplatePool::load(cfg.template_store);
            const auto llm = make_language_model(cfg);

            std::vector<std::int64_t> ids;
            if (!assess_ids.empty()) {
                ids = scope_ids(ds, Scope::filtered_subset, assess_ids);
            } else {
                const FilterState filter{c, assess_min, assess_max};
                std::vector<std::int64_t> filtered;
                for (const auto& r : ds.records)
                    if (!r.excluded && filter.contains(r)) filtered.push_back(r.id);
                ids = scope_ids(ds, parse_scope(assess_scope), filtered);
            }
            ReassessOptions options;
            options.parallelism = cfg.reassess_parallelism;
            const ReassessReport report = reassess_all(ds, ids, c, pool.latest(c, s), *llm, options);
            save(ds, cfg.dataset_store);
            if (!assess_report.empty()) write_file(assess_report, to_json(report).dump(2));
            std::cout << report.rows.size() << " assessed, " << report.changed_count() << " changed, "
                      << report.error_count() << " errors\n";
            return report.error_count() == 0 ? 0 : 2;
        } else if (*eval_cmd) {
            const Dataset expert = load(eval_expert);
            std::vector<PredictionSet> sets;
            for (const auto& p : eval_predictions) sets.push_back(load_prediction_set(p));
            const AccuracyReport report = compare(expert, sets);
            std::cout << (eval_json ? to_json(report).dump(2) + "\n" : render_table(report));
        } else if (*serve_cmd) {
            ServiceConfig cfg = load_config(serve_config);
            apply_env_overrides(cfg);
            if (!serve_host.empty()) cfg.host = serve_host;
            if (serve_port != 0) cfg.port = serve_port;
            auto ws = Workspace::from_config(cfg);
            std::cout << "listening on " << cfg.host << ':' << cfg.port << std::endl;
            serve(*ws, cfg.host, cfg.port);
        } else if (*prompt_cmd) {
            std::cout << assemble(load_template(prompt_template), prompt_text).text;
        } else if (*fp_cmd) {
            std::cout << text::fingerprint(read_file(fp_file)) << '\n';
        } else if (*ms_cmd) {
            // Scenario entries: {concept, strategy, version, sentence | text, continuation, attention_plan}
            const json scenario = json::parse(read_file(ms_scenario));
            TemplatePool pool = TemplatePool::load(ms_templates);
            for (const auto& path : ms_edits) {
                const json doc = json::parse(read_file(path));
                pool.edit(require_concept(doc.at("concept").get<std::string>()),
                          parse_strategy(doc.value("strategy", std::string("cot_cr"))),
                          template_edit_from_json(doc.at("edit")));
            }
            const Dataset ds = ms_store.empty() ? Dataset{} : load(ms_store);
            std::map<std::string, ScriptEntry> script;
            for (const auto& e : scenario.at("entries")) {
                const Concept c = require_concept(e.at("concept").get<std::string>());
                const Strategy s = parse_strategy(e.value("strategy", std::string("cot_cr")));
                const PromptTemplate& t =
                    e.contains("version") ? pool.get(c, s, e.at("version").get<std::int64_t>()) : pool.latest(c, s);
                std::string target;
                if (e.contains("sentence")) {
                    const auto* r = ds.find(e.at("sentence").get<std::int64_t>());
                    if (!r) throw Error("scenario names unknown sentence " + e.at("sentence").dump());
                    target = r->text;
                } else {
                    target = e.at("text").get<std::string>();
                }
                ScriptEntry entry;
                entry.text = e.at("continuation").get<std::string>();
                if (e.contains("attention_plan"))
                    for (const auto& p : e.at("attention_plan"))
                        entry.attention_plan.push_back(
                            {{p.at(0).at(0).get<std::size_t>(), p.at(0).at(1).get<std::size_t>()}, p.at(1).get<double>()});
                const std::string key = text::fingerprint(assemble(t, target).text);
                if (!script.emplace(key, std::move(entry)).second)
                    throw Error("two scenario entries produce the same prompt");
            }
            write_file(ms_out, to_json(script).dump(1) + "\n");
            std::cout << "wrote " << script.size() << " scripted answers\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
