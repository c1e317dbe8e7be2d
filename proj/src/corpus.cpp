#include "opra/corpus.hpp"

#include "opra/kernels.hpp"
#include "opra/text.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace opra {

using nlohmann::json;

std::string_view source_name(Source s) {
    switch (s) {
        case Source::amazon: return "amazon";
        case Source::google: return "google";
        case Source::imdb: return "imdb";
        case Source::other: return "other";
    }
    return "other";
}

Source parse_source(std::string_view s) {
    if (s == "amazon") return Source::amazon;
    if (s == "google") return Source::google;
    if (s == "imdb") return Source::imdb;
    return Source::other;
}

std::string_view sentiment_name(Sentiment s) {
    switch (s) {
        case Sentiment::positive: return "positive";
        case Sentiment::negative: return "negative";
        case Sentiment::unset: return "unset";
    }
    return "unset";
}

SentenceRecord* Dataset::find(std::int64_t id) {
    for (auto& r : records)
        if (r.id == id) return &r;
    return nullptr;
}

const SentenceRecord* Dataset::find(std::int64_t id) const {
    for (const auto& r : records)
        if (r.id == id) return &r;
    return nullptr;
}

std::size_t Dataset::active_count() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.excluded ? 0 : 1;
    return n;
}

InputFormat parse_format(std::string_view s) {
    if (s == "csv") return InputFormat::csv;
    if (s == "jsonl") return InputFormat::jsonl;
    throw Error("unknown input format: " + std::string(s));
}

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::optional<bool> parse_bool_cell(std::string_view cell, std::size_t line, std::string_view column) {
    const std::string v = text::trim(cell);
    if (v.empty()) return std::nullopt;
    std::string lower;
    for (char c : v) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "true" || lower == "1" || lower == "t" || lower == "yes") return true;
    if (lower == "false" || lower == "0" || lower == "f" || lower == "no") return false;
    throw ParseError("line " + std::to_string(line) + ": column '" + std::string(column) +
                     "' is not a boolean: " + v);
}

// RFC 4180 rows: quoted fields may contain commas, newlines and doubled quotes.
// Returns rows together with the 1-based line each row starts on.
std::vector<std::pair<std::size_t, std::vector<std::string>>> parse_csv(std::string_view content) {
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t row_line = 1;
    auto end_row = [&] {
        if (field_started || !row.empty() || !field.empty()) {
            row.push_back(std::move(field));
            rows.emplace_back(row_line, std::move(row));
        }
        row.clear();
        field.clear();
        field_started = false;
    };
    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) throw ParseError("line " + std::to_string(line) + ": stray quote");
                quoted = true;
                field_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r': break;
            case '\n':
                end_row();
                ++line;
                row_line = line;
                break;
            default: field.push_back(c); field_started = true;
        }
    }
    if (quoted) throw ParseError("line " + std::to_string(row_line) + ": unterminated quoted field");
    end_row();
    return rows;
}

void finish_ingest(Dataset& ds, Source source, std::string path) {
    if (ds.records.empty()) throw ParseError("empty dataset");
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        ds.records[i].id = static_cast<std::int64_t>(i);
        ds.records[i].source = source;
    }
    ds.provenance = {std::move(path), utc_now()};
}

}  // namespace

Dataset ingest_jsonl_text(std::string_view content, Source source) {
    Dataset ds;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        const std::size_t nl = content.find('\n', pos);
        const std::string_view line =
            content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
        if (text::trim(line).empty()) continue;

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
        }
        if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string())
            throw ParseError("line " + std::to_string(line_no) + ": missing string field 'text'");

        SentenceRecord r;
        r.text = obj["text"].get<std::string>();
        for (Concept c : kAllConcepts) {
            const auto key = std::string(concept_id(c));
            if (!obj.contains(key) || obj[key].is_null()) continue;
            if (!obj[key].is_boolean())
                throw ParseError("line " + std::to_string(line_no) + ": field '" + key + "' is not a boolean");
            r.expert_label[c] = obj[key].get<bool>();
        }
        ds.records.push_back(std::move(r));
    }
    finish_ingest(ds, source, {});
    return ds;
}

Dataset ingest_csv_text(std::string_view content, Source source) {
    const auto rows = parse_csv(content);
    if (rows.empty()) throw ParseError("empty dataset");

    const auto& header = rows.front().second;
    std::optional<std::size_t> text_col;
    ConceptMap<std::optional<std::size_t>> label_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = text::trim(header[i]);
        if (name == "text") text_col = i;
        if (auto c = parse_concept(name); c && name.size() > 2) label_cols[*c] = i;
    }
    if (!text_col) throw ParseError("line 1: header has no 'text' column");

    Dataset ds;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const auto& [line, cells] = rows[k];
        if (cells.size() == 1 && text::trim(cells[0]).empty()) continue;
        if (cells.size() != header.size())
            throw ParseError("line " + std::to_string(line) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(cells.size()));
        SentenceRecord r;
        r.text = cells[*text_col];
        for (Concept c : kAllConcepts)
            if (label_cols[c]) r.expert_label[c] = parse_bool_cell(cells[*label_cols[c]], line, concept_id(c));
        ds.records.push_back(std::move(r));
    }
    finish_ingest(ds, source, {});
    return ds;
}

Dataset ingest(const std::filesystem::path& path, InputFormat format, Source source) {
    if (!std::filesystem::exists(path)) throw Error("no such file: " + path.string());
    const std::string content = read_file(path);
    Dataset ds = format == InputFormat::jsonl ? ingest_jsonl_text(content, source) : ingest_csv_text(content, source);
    ds.provenance.source_path = path.string();
    return ds;
}

std::string_view prune_rule_name(PruneRule r) {
    return r == PruneRule::near_duplicate ? "near_duplicate" : "uninformative";
}

PruneResult prune_uninformative(Dataset ds, const PruneOptions& options) {
    PruneReport report;
    report.options = options;

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& r = ds.records[i];
        if (r.excluded) continue;
        if (r.embedding.empty()) throw Error("embed before pruning (record " + std::to_string(r.id) + ")");
        candidates.push_back(i);
    }
    report.considered = candidates.size();

    std::vector<std::vector<double>> vectors;
    vectors.reserve(candidates.size());
    for (std::size_t i : candidates) vectors.push_back(ds.records[i].embedding);
    const Matrix distance = kernels::cosine_distances(vectors);

    std::vector<std::size_t> kept;  // positions into candidates
    for (std::size_t a = 0; a < candidates.size(); ++a) {
        auto& rec = ds.records[candidates[a]];
        const std::size_t tokens = text::alphabetic_token_count(rec.text);
        if (tokens < options.min_tokens) {
            rec.excluded = true;
            report.removals.push_back({rec.id, PruneRule::uninformative, static_cast<double>(tokens), std::nullopt});
            continue;
        }
        std::optional<std::size_t> dup;
        for (std::size_t b : kept) {
            if (distance(a, b) < options.dup_threshold) {
                dup = b;
                break;
            }
        }
        if (dup) {
            rec.excluded = true;
            report.removals.push_back(
                {rec.id, PruneRule::near_duplicate, distance(a, *dup), ds.records[candidates[*dup]].id});
        } else {
            kept.push_back(a);
        }
    }
    return {std::move(ds), std::move(report)};
}

namespace {

json optional_map(const ConceptMap<std::optional<double>>& m) {
    json out = json::object();
    for (Concept c : kAllConcepts) out[std::string(concept_id(c))] = m[c] ? json(*m[c]) : json(nullptr);
    return out;
}

json optional_map(const ConceptMap<std::optional<bool>>& m) {
    json out = json::object();
    for (Concept c : kAllConcepts) out[std::string(concept_id(c))] = m[c] ? json(*m[c]) : json(nullptr);
    return out;
}

template <typename T>
ConceptMap<std::optional<T>> read_optional_map(const json& obj) {
    ConceptMap<std::optional<T>> m;
    if (!obj.is_object()) return m;
    for (Concept c : kAllConcepts) {
        const auto key = std::string(concept_id(c));
        if (obj.contains(key) && !obj[key].is_null()) m[c] = obj[key].get<T>();
    }
    return m;
}

}  // namespace

json to_json(const Dataset& ds) {
    json doc;
    doc["version"] = kDatasetVersion;
    doc["provenance"] = {{"source_path", ds.provenance.source_path}, {"ingested_at", ds.provenance.ingested_at}};
    json concepts = json::array();
    for (Concept c : ds.concepts) concepts.push_back(concept_id(c));
    doc["concepts"] = concepts;
    json scaling = json::object();
    for (Concept c : kAllConcepts) {
        if (const auto& p = ds.coc_scaling[c])
            scaling[std::string(concept_id(c))] = {{"mean", p->mean}, {"std", p->std}, {"min", p->min}, {"max", p->max}};
    }
    doc["coc_scaling"] = scaling;
    json records = json::array();
    for (const auto& r : ds.records) {
        records.push_back({{"id", r.id},
                           {"text", r.text},
                           {"source", source_name(r.source)},
                           {"embedding", r.embedding},
                           {"sentiment", sentiment_name(r.sentiment)},
                           {"sentiment_probability", r.sentiment_probability},
                           {"coc_raw", optional_map(r.coc_raw)},
                           {"coc", optional_map(r.coc)},
                           {"llm_label", optional_map(r.llm_label)},
                           {"expert_label", optional_map(r.expert_label)},
                           {"excluded", r.excluded}});
    }
    doc["records"] = records;
    return doc;
}

Dataset dataset_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("version")) throw ParseError("persisted dataset has no version header");
    if (doc["version"] != kDatasetVersion)
        throw ParseError("unsupported dataset version " + doc["version"].dump() + " (expected " +
                         std::to_string(kDatasetVersion) + ")");
    try {
        Dataset ds;
        ds.provenance.source_path = doc.at("provenance").value("source_path", "");
        ds.provenance.ingested_at = doc.at("provenance").value("ingested_at", "");
        ds.concepts.clear();
        for (const auto& c : doc.at("concepts")) ds.concepts.push_back(require_concept(c.get<std::string>()));
        for (Concept c : kAllConcepts) {
            const auto key = std::string(concept_id(c));
            if (doc.contains("coc_scaling") && doc["coc_scaling"].contains(key)) {
                const auto& p = doc["coc_scaling"][key];
                ds.coc_scaling[c] = ScalingParams{p.at("mean").get<double>(), p.at("std").get<double>(),
                                                  p.at("min").get<double>(), p.at("max").get<double>()};
            }
        }
        for (const auto& j : doc.at("records")) {
            SentenceRecord r;
            r.id = j.at("id").get<std::int64_t>();
            r.text = j.at("text").get<std::string>();
            r.source = parse_source(j.value("source", "other"));
            r.embedding = j.at("embedding").get<std::vector<double>>();
            const std::string sentiment = j.value("sentiment", "unset");
            r.sentiment = sentiment == "positive"   ? Sentiment::positive
                          : sentiment == "negative" ? Sentiment::negative
                                                    : Sentiment::unset;
            r.sentiment_probability = j.value("sentiment_probability", 0.0);
            r.coc_raw = read_optional_map<double>(j.value("coc_raw", json::object()));
            r.coc = read_optional_map<double>(j.value("coc", json::object()));
            r.llm_label = read_optional_map<bool>(j.value("llm_label", json::object()));
            r.expert_label = read_optional_map<bool>(j.value("expert_label", json::object()));
            r.excluded = j.at("excluded").get<bool>();
            for (Concept c : kAllConcepts)
                if (r.coc[c] && (*r.coc[c] < 0.0 || *r.coc[c] > 1.0))
                    throw ParseError("record " + std::to_string(r.id) + ": coc outside [0,1]");
            ds.records.push_back(std::move(r));
        }
        return ds;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed dataset document: ") + e.what());
    }
}

json to_json(const PruneReport& report) {
    json removals = json::array();
    for (const auto& r : report.removals) {
        json j{{"id", r.id}, {"rule", prune_rule_name(r.rule)}, {"value", r.value}};
        if (r.duplicate_of) j["duplicate_of"] = *r.duplicate_of;
        removals.push_back(j);
    }
    return {{"dup_threshold", report.options.dup_threshold},
            {"min_tokens", report.options.min_tokens},
            {"considered", report.considered},
            {"removed", report.removals.size()},
            {"removals", removals}};
}

void save(const Dataset& ds, const std::filesystem::path& path) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp);
        out << to_json(ds).dump();
        if (!out) throw Error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Dataset load(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    json doc;
    try {
        doc = json::parse(content);
    } catch (const json::parse_error& e) {
        throw ParseError("cannot parse " + path.string() + ": " + e.what());
    }
    return dataset_from_json(doc);
}

}  // namespace opra
