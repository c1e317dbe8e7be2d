#include "opra/prompting.hpp"

#include "opra/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <thread>

namespace opra {

using nlohmann::json;

namespace {

// Collapses every whitespace run (newlines included) to one space so each
// field stays on its own line.
std::string one_line(std::string_view s) {
    std::string out;
    bool space = false;
    for (char ch : s) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            space = !out.empty();
            continue;
        }
        if (space) out.push_back(' ');
        space = false;
        out.push_back(ch);
    }
    return out;
}

std::string label_word(bool label) { return label ? "True" : "False"; }

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

// Finds `marker` at a word start (beginning of text or after whitespace).
std::size_t find_marker(std::string_view text, std::string_view marker, std::size_t from = 0) {
    for (std::size_t pos = text.find(marker, from); pos != std::string_view::npos; pos = text.find(marker, pos + 1))
        if (pos == 0 || std::isspace(static_cast<unsigned char>(text[pos - 1]))) return pos;
    return std::string_view::npos;
}

std::string cue_for(const PromptTemplate& t) {
    switch (t.strategy) {
        case Strategy::cot_cr: return std::string(Markers::clues);
        case Strategy::cot: return std::string(Markers::reasoning);
        case Strategy::vanilla: return label_marker(t.concept_id);
    }
    return {};
}

void write_file_atomically(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

struct WordToken {
    std::size_t begin;
    std::size_t end;
    std::string_view text;
};

std::vector<WordToken> word_tokens(std::string_view s) {
    std::vector<WordToken> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t b = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > b) out.push_back({b, i, s.substr(b, i - b)});
    }
    return out;
}

}  // namespace

std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::vanilla: return "vanilla";
        case Strategy::cot: return "cot";
        case Strategy::cot_cr: return "cot_cr";
    }
    return "cot_cr";
}

Strategy parse_strategy(std::string_view s) {
    std::string lower;
    for (char ch : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (lower == "vanilla") return Strategy::vanilla;
    if (lower == "cot") return Strategy::cot;
    if (lower == "cot_cr" || lower == "cotcr" || lower == "cot-cr") return Strategy::cot_cr;
    throw Error("unknown strategy: " + std::string(s));
}

std::string label_marker(Concept c) { return std::string(concept_marker(c)) + ":"; }

void PromptTemplate::validate() const {
    if (examples.empty()) throw Error("template needs at least one example");
    if (instructions.empty()) throw Error("template needs at least one instruction");
    for (const auto& ins : instructions)
        if (text::trim(ins).empty()) throw Error("template instruction is empty");
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        const std::string where = "example " + std::to_string(i + 1);
        if (text::trim(ex.input).empty()) throw Error(where + " has no input");
        if (strategy != Strategy::vanilla && text::trim(ex.reasoning).empty()) throw Error(where + " has no reasoning");
        if (strategy == Strategy::cot_cr && text::trim(ex.clues).empty()) throw Error(where + " has no clues");
    }
}

json to_json(const PromptTemplate& t) {
    json examples = json::array();
    for (const auto& ex : t.examples)
        examples.push_back({{"input", ex.input}, {"clues", ex.clues}, {"reasoning", ex.reasoning}, {"label", ex.label}});
    return {{"concept", concept_id(t.concept_id)},
            {"strategy", strategy_name(t.strategy)},
            {"version", t.version},
            {"instructions", t.instructions},
            {"examples", examples}};
}

PromptTemplate template_from_json(const json& doc) {
    PromptTemplate t;
    try {
        t.concept_id = require_concept(doc.at("concept").get<std::string>());
        t.strategy = parse_strategy(doc.at("strategy").get<std::string>());
        t.version = doc.value("version", std::int64_t{1});
        t.instructions = doc.at("instructions").get<std::vector<std::string>>();
        for (const auto& ex : doc.at("examples"))
            t.examples.push_back({ex.at("input").get<std::string>(), ex.value("clues", std::string{}),
                                  ex.value("reasoning", std::string{}), ex.at("label").get<bool>()});
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed template: ") + e.what());
    }
    t.validate();
    return t;
}

PromptTemplate load_template(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open template " + path.string());
    try {
        return template_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError("cannot parse " + path.string() + ": " + e.what());
    }
}

std::string_view role_name(SentenceRole r) {
    switch (r) {
        case SentenceRole::instruction: return "instruction";
        case SentenceRole::example_input: return "example_input";
        case SentenceRole::example_clues: return "example_clues";
        case SentenceRole::example_reasoning: return "example_reasoning";
        case SentenceRole::example_label: return "example_label";
        case SentenceRole::target: return "target";
        case SentenceRole::clues: return "clues";
        case SentenceRole::reasoning: return "reasoning";
        case SentenceRole::label: return "label";
        case SentenceRole::other: return "other";
    }
    return "other";
}

std::vector<std::string> split_sentences(std::string_view instruction) {
    const std::string flat = one_line(instruction);
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i + 1 < flat.size(); ++i) {
        const char ch = flat[i];
        if ((ch == '.' || ch == '!' || ch == '?') && flat[i + 1] == ' ') {
            out.push_back(flat.substr(start, i + 1 - start));
            start = i + 2;
        }
    }
    if (start < flat.size()) out.push_back(flat.substr(start));
    return out;
}

AssembledPrompt assemble(const PromptTemplate& t, std::string_view target) {
    std::string s;
    for (const auto& ins : t.instructions)
        for (const auto& sentence : split_sentences(ins)) s += sentence + "\n";
    s += "\n";
    const std::string marker = label_marker(t.concept_id);
    for (const auto& ex : t.examples) {
        s += std::string(Markers::input) + " " + one_line(ex.input) + "\n";
        if (t.strategy == Strategy::cot_cr) s += std::string(Markers::clues) + " " + one_line(ex.clues) + "\n";
        if (t.strategy != Strategy::vanilla)
            s += std::string(Markers::reasoning) + " " + one_line(ex.reasoning) + "\n";
        s += marker + " " + label_word(ex.label) + "\n\n";
    }
    s += std::string(Markers::input) + " " + one_line(target) + "\n";

    AssembledPrompt p;
    p.cue = cue_for(t);
    const std::size_t body = s.size();
    s += p.cue;
    p.text = std::move(s);
    p.sentences = segment(std::string_view(p.text).substr(0, body), body, t.concept_id);
    return p;
}

std::vector<Sentence> segment(std::string_view full_text, std::size_t prompt_size, Concept c) {
    const std::string concept_mark = label_marker(c);
    const std::array<std::string_view, 4> markers{Markers::input, Markers::clues, Markers::reasoning, concept_mark};

    std::vector<Sentence> out;
    auto emit = [&](std::size_t b, std::size_t e) {
        while (b < e && std::isspace(static_cast<unsigned char>(full_text[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(full_text[e - 1]))) --e;
        if (b == e) return;
        Sentence s;
        s.id = out.size();
        s.begin = b;
        s.end = e;
        s.generated = e > prompt_size;
        s.text = std::string(full_text.substr(b, e - b));
        out.push_back(std::move(s));
    };

    std::size_t line_start = 0;
    while (line_start <= full_text.size()) {
        std::size_t line_end = full_text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = full_text.size();
        const std::string_view line = full_text.substr(line_start, line_end - line_start);
        std::vector<std::size_t> cuts;
        for (auto m : markers)
            for (std::size_t pos = find_marker(line, m, 1); pos != std::string_view::npos;
                 pos = find_marker(line, m, pos + 1))
                cuts.push_back(pos);
        std::sort(cuts.begin(), cuts.end());
        std::size_t piece = 0;
        for (std::size_t cut : cuts) {
            emit(line_start + piece, line_start + cut);
            piece = cut;
        }
        emit(line_start + piece, line_end);
        if (line_end == full_text.size()) break;
        line_start = line_end + 1;
    }

    std::optional<std::size_t> target;
    std::size_t first_input = out.size();
    for (const auto& s : out) {
        if (s.begin >= prompt_size || !starts_with(s.text, Markers::input)) continue;
        target = s.id;
        first_input = std::min(first_input, s.id);
    }
    for (auto& s : out) {
        const bool after = target && s.id > *target;
        if (target && s.id == *target)
            s.role = SentenceRole::target;
        else if (starts_with(s.text, Markers::input))
            s.role = SentenceRole::example_input;
        else if (starts_with(s.text, Markers::clues))
            s.role = after ? SentenceRole::clues : SentenceRole::example_clues;
        else if (starts_with(s.text, Markers::reasoning))
            s.role = after ? SentenceRole::reasoning : SentenceRole::example_reasoning;
        else if (starts_with(s.text, concept_mark))
            s.role = after ? SentenceRole::label : SentenceRole::example_label;
        else if (s.id < first_input)
            s.role = SentenceRole::instruction;
    }
    return out;
}

ParsedAnswer parse(std::string_view text, Concept c) {
    const std::string marker = label_marker(c);
    const std::size_t clues_at = find_marker(text, Markers::clues);
    const std::size_t after_clues = clues_at == std::string_view::npos ? 0 : clues_at + Markers::clues.size();
    const std::size_t reasoning_at = find_marker(text, Markers::reasoning, after_clues);
    const std::size_t after_reasoning =
        reasoning_at == std::string_view::npos ? after_clues : reasoning_at + Markers::reasoning.size();
    const std::size_t label_at = find_marker(text, marker, after_reasoning);
    if (label_at == std::string_view::npos) throw ParseError("unlabeled continuation");

    std::size_t i = label_at + marker.size();
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::string word;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i])))
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i++]))));
    ParsedAnswer a;
    if (word == "true")
        a.label = true;
    else if (word == "false")
        a.label = false;
    else
        throw ParseError("unlabeled continuation");

    if (clues_at != std::string_view::npos) {
        const std::size_t end = reasoning_at != std::string_view::npos ? reasoning_at : label_at;
        a.clues = text::trim(text.substr(after_clues, end - after_clues));
    }
    if (reasoning_at != std::string_view::npos)
        a.reasoning = text::trim(text.substr(after_reasoning, label_at - after_reasoning));
    return a;
}

std::string synthesize(const ParsedAnswer& answer, Concept c, Strategy s) {
    std::string out;
    if (s == Strategy::cot_cr) out += std::string(Markers::clues) + " " + answer.clues + "\n";
    if (s != Strategy::vanilla) out += std::string(Markers::reasoning) + " " + answer.reasoning + "\n";
    out += label_marker(c) + " " + label_word(answer.label);
    return out;
}

json to_json(const AssessmentResult& r) {
    json transcript = json::array();
    for (const auto& s : r.transcript)
        transcript.push_back({{"id", s.id}, {"text", s.text}, {"role", role_name(s.role)}, {"generated", s.generated}});
    return {{"sentence_id", r.sentence_id},
            {"concept", concept_id(r.concept_id)},
            {"strategy", strategy_name(r.strategy)},
            {"template_version", r.template_version},
            {"clues", r.clues},
            {"reasoning", r.reasoning},
            {"label", r.label},
            {"prompt", r.prompt},
            {"continuation", r.continuation},
            {"transcript", transcript}};
}

AssessmentResult assess_text(std::int64_t id, std::string_view text, Concept c, const PromptTemplate& t,
                             const LanguageModel& llm) {
    if (t.concept_id != c)
        throw Error("template is for " + std::string(concept_id(t.concept_id)) + ", not " + std::string(concept_id(c)));
    const AssembledPrompt prompt = assemble(t, text);
    GenerationResult gen = llm.generate(prompt.text);
    const ParsedAnswer answer = parse(prompt.cue + gen.text, c);

    AssessmentResult r;
    r.sentence_id = id;
    r.concept_id = c;
    r.strategy = t.strategy;
    r.template_version = t.version;
    r.clues = answer.clues;
    r.reasoning = answer.reasoning;
    r.label = answer.label;
    r.prompt = prompt.text;
    r.continuation = std::move(gen.text);
    r.transcript = segment(r.prompt + r.continuation, r.prompt.size(), c);
    r.token_texts = std::move(gen.token_texts);
    r.attention = std::move(gen.attention);
    return r;
}

AssessmentResult assess(SentenceRecord& record, Concept c, const PromptTemplate& t, const LanguageModel& llm) {
    AssessmentResult r = assess_text(record.id, record.text, c, t, llm);
    record.llm_label[c] = r.label;
    return r;
}

json to_json(const TemplateEdit& e) {
    json doc = json::object();
    if (e.instructions) doc["instructions"] = *e.instructions;
    if (e.examples) {
        json examples = json::array();
        for (const auto& ex : *e.examples)
            examples.push_back(
                {{"input", ex.input}, {"clues", ex.clues}, {"reasoning", ex.reasoning}, {"label", ex.label}});
        doc["examples"] = examples;
    }
    return doc;
}

TemplateEdit template_edit_from_json(const json& doc) {
    TemplateEdit e;
    try {
        if (doc.contains("instructions")) e.instructions = doc.at("instructions").get<std::vector<std::string>>();
        if (doc.contains("examples")) {
            e.examples.emplace();
            for (const auto& ex : doc.at("examples"))
                e.examples->push_back({ex.at("input").get<std::string>(), ex.value("clues", std::string{}),
                                       ex.value("reasoning", std::string{}), ex.at("label").get<bool>()});
        }
    } catch (const json::exception& ex) {
        throw ParseError(std::string("malformed template edit: ") + ex.what());
    }
    return e;
}

std::vector<DiffHunk> word_diff(std::string_view before, std::string_view after) {
    const auto a = word_tokens(before);
    const auto b = word_tokens(after);
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    // lcs[i][j] = LCS length of a[i..] and b[j..].
    std::vector<std::vector<std::uint32_t>> lcs(n + 1, std::vector<std::uint32_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            lcs[i][j] = a[i].text == b[j].text ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);

    std::vector<DiffHunk> hunks;
    std::size_t i = 0, j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && a[i].text == b[j].text) {
            ++i;
            ++j;
            continue;
        }
        const std::size_t i0 = i, j0 = j;
        while ((i < n || j < m) && !(i < n && j < m && a[i].text == b[j].text)) {
            if (j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j]))
                ++j;
            else
                ++i;
        }
        DiffHunk h;
        h.old_begin = i0 < n ? a[i0].begin : before.size();
        h.old_end = i > i0 ? a[i - 1].end : h.old_begin;
        h.new_begin = j0 < m ? b[j0].begin : after.size();
        h.new_end = j > j0 ? b[j - 1].end : h.new_begin;
        h.old_text = std::string(before.substr(h.old_begin, h.old_end - h.old_begin));
        h.new_text = std::string(after.substr(h.new_begin, h.new_end - h.new_begin));
        hunks.push_back(std::move(h));
    }
    return hunks;
}

std::string render_template(const PromptTemplate& t) {
    std::string text = assemble(t, "").text;
    const std::string tail = std::string(Markers::input) + " \n" + cue_for(t);
    return text.substr(0, text.size() - tail.size());
}

EditResult edit_template(const PromptTemplate& t, const TemplateEdit& edit) {
    PromptTemplate next = t;
    if (edit.instructions) next.instructions = *edit.instructions;
    if (edit.examples) next.examples = *edit.examples;
    next.version = t.version + 1;
    next.validate();
    return {next, word_diff(render_template(t), render_template(next))};
}

json to_json(const std::vector<DiffHunk>& diff) {
    json out = json::array();
    for (const auto& h : diff)
        out.push_back({{"old_begin", h.old_begin},
                       {"old_end", h.old_end},
                       {"new_begin", h.new_begin},
                       {"new_end", h.new_end},
                       {"old_text", h.old_text},
                       {"new_text", h.new_text}});
    return out;
}

void TemplatePool::add(PromptTemplate t) {
    t.validate();
    auto& list = versions_[{t.concept_id, t.strategy}];
    if (!list.empty() && t.version <= list.back().version)
        throw Error("template version " + std::to_string(t.version) + " is not newer than " +
                    std::to_string(list.back().version));
    list.push_back(std::move(t));
}

const PromptTemplate& TemplatePool::latest(Concept c, Strategy s) const {
    const auto it = versions_.find({c, s});
    if (it == versions_.end())
        throw Error("no template for " + std::string(concept_id(c)) + "/" + std::string(strategy_name(s)));
    return it->second.back();
}

const PromptTemplate& TemplatePool::get(Concept c, Strategy s, std::int64_t version) const {
    const auto it = versions_.find({c, s});
    if (it != versions_.end())
        for (const auto& t : it->second)
            if (t.version == version) return t;
    throw Error("no template version " + std::to_string(version) + " for " + std::string(concept_id(c)) + "/" +
                std::string(strategy_name(s)));
}

bool TemplatePool::contains(Concept c, Strategy s) const { return versions_.count({c, s}) > 0; }

EditResult TemplatePool::edit(Concept c, Strategy s, const TemplateEdit& edit) {
    EditResult r = edit_template(latest(c, s), edit);
    add(r.updated);
    return r;
}

std::vector<PromptTemplate> TemplatePool::all() const {
    std::vector<PromptTemplate> out;
    for (const auto& [key, list] : versions_) out.insert(out.end(), list.begin(), list.end());
    return out;
}

json TemplatePool::to_json() const {
    json out = json::array();
    for (const auto& t : all()) out.push_back(opra::to_json(t));
    return out;
}

TemplatePool TemplatePool::from_json(const json& doc) {
    if (!doc.is_array()) throw ParseError("template store must be a JSON list");
    std::vector<PromptTemplate> list;
    for (const auto& item : doc) list.push_back(template_from_json(item));
    std::stable_sort(list.begin(), list.end(),
                     [](const PromptTemplate& a, const PromptTemplate& b) { return a.version < b.version; });
    TemplatePool pool;
    for (auto& t : list) pool.add(std::move(t));
    return pool;
}

void TemplatePool::save(const std::filesystem::path& path) const { write_file_atomically(path, to_json().dump(2) + "\n"); }

TemplatePool TemplatePool::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open template store " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError("cannot parse " + path.string() + ": " + e.what());
    }
}

std::string_view scope_name(Scope s) { return s == Scope::all ? "all" : "filtered_subset"; }

Scope parse_scope(std::string_view s) {
    if (s == "all") return Scope::all;
    if (s == "filtered_subset" || s == "filtered") return Scope::filtered_subset;
    throw Error("unknown scope: " + std::string(s));
}

std::size_t ReassessReport::changed_count() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const ReassessRow& r) { return r.changed; }));
}

std::size_t ReassessReport::error_count() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const ReassessRow& r) { return !r.error.empty(); }));
}

json to_json(const ReassessReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        json j{{"id", row.id},
               {"old_label", row.old_label ? json(*row.old_label) : json(nullptr)},
               {"new_label", row.new_label ? json(*row.new_label) : json(nullptr)},
               {"changed", row.changed}};
        if (!row.error.empty()) j["error"] = row.error;
        rows.push_back(std::move(j));
    }
    return {{"concept", concept_id(r.concept_id)},
            {"template_version", r.template_version},
            {"changed", r.changed_count()},
            {"errors", r.error_count()},
            {"rows", rows}};
}

std::vector<std::int64_t> scope_ids(const Dataset& ds, Scope scope, const std::vector<std::int64_t>& filtered) {
    std::vector<std::int64_t> out;
    if (scope == Scope::all) {
        for (const auto& r : ds.records)
            if (!r.excluded) out.push_back(r.id);
    } else {
        for (auto id : filtered) {
            const auto* r = ds.find(id);
            if (r && !r->excluded) out.push_back(id);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

ReassessReport reassess_all(Dataset& ds, const std::vector<std::int64_t>& ids, Concept c, const PromptTemplate& t,
                            const LanguageModel& llm, const ReassessOptions& options) {
    std::vector<std::int64_t> order = ids;
    std::sort(order.begin(), order.end());

    ReassessReport report;
    report.concept_id = c;
    report.template_version = t.version;
    std::vector<std::string> texts;
    for (auto id : order) {
        const auto* r = ds.find(id);
        if (!r) throw Error("reassess: unknown sentence id " + std::to_string(id));
        report.rows.push_back({id, r->llm_label[c], std::nullopt, false, {}});
        texts.push_back(r->text);
    }

    std::mutex commit_mutex;
    std::size_t done = 0;
    auto commit = [&](const AssessmentResult& result) {
        if (options.commit)
            options.commit(result);
        else
            ds.find(result.sentence_id)->llm_label[c] = result.label;
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < order.size(); i = next++) {
            auto& row = report.rows[i];
            std::optional<AssessmentResult> result;
            try {
                result = assess_text(order[i], texts[i], c, t, llm);
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            std::lock_guard lock(commit_mutex);
            if (result) {
                try {
                    commit(*result);
                    row.new_label = result->label;
                    row.changed = row.old_label != row.new_label;
                } catch (const std::exception& e) {
                    row.error = std::string("commit failed: ") + e.what();
                }
            }
            ++done;
            if (options.progress) options.progress(done, order.size());
        }
    };

    const std::size_t threads = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(1, order.size()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    }
    return report;
}

}  // namespace opra
