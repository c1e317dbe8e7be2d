#include "opra/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace opra {

using nlohmann::json;

std::int64_t centi_percent(std::size_t matches, std::size_t total) {
    if (total == 0) throw Error("accuracy of zero sentences");
    const auto m = static_cast<std::int64_t>(matches);
    const auto t = static_cast<std::int64_t>(total);
    return (20000 * m + t) / (2 * t);
}

std::int64_t centi_mean(const std::vector<std::int64_t>& values) {
    if (values.empty()) throw Error("mean of nothing");
    std::int64_t sum = 0;
    for (auto v : values) sum += v;
    const auto n = static_cast<std::int64_t>(values.size());
    return (2 * sum + n) / (2 * n);
}

std::string format_centi(std::int64_t centi) {
    std::ostringstream os;
    os << centi / 100 << '.' << std::setw(2) << std::setfill('0') << centi % 100;
    return os.str();
}

Accuracy score(const Dataset& ds, Concept c) {
    Accuracy a;
    for (const auto& r : ds.records) {
        if (r.excluded || !r.expert_label[c] || !r.llm_label[c]) continue;
        ++a.total;
        if (*r.expert_label[c] == *r.llm_label[c]) ++a.matches;
    }
    if (a.total == 0) throw Error("no sentence has both an LLM and an expert label for " + std::string(concept_id(c)));
    a.centi_percent = centi_percent(a.matches, a.total);
    return a;
}

PredictionSet prediction_set_from_json(const json& doc) {
    PredictionSet p;
    try {
        p.model = doc.at("model").get<std::string>();
        p.strategy = doc.at("strategy").get<std::string>();
        p.k = doc.at("k").get<std::int64_t>();
        p.dataset = doc.value("dataset", std::string{});
        for (const auto& [key, labels] : doc.at("predictions").items()) {
            std::size_t used = 0;
            const std::int64_t id = std::stoll(key, &used);
            if (used != key.size()) throw ParseError("prediction key is not an integer: " + key);
            ConceptMap<std::optional<bool>> m;
            for (const auto& [name, value] : labels.items()) {
                const Concept c = require_concept(name);
                if (value.is_boolean()) m[c] = value.get<bool>();
            }
            p.predictions[id] = m;
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed prediction set: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw ParseError("prediction key is not an integer");
    }
    return p;
}

json to_json(const PredictionSet& p) {
    json preds = json::object();
    for (const auto& [id, labels] : p.predictions) {
        json row = json::object();
        for (Concept c : kAllConcepts) row[std::string(concept_id(c))] = labels[c] ? json(*labels[c]) : json(nullptr);
        preds[std::to_string(id)] = row;
    }
    json doc{{"model", p.model}, {"strategy", p.strategy}, {"k", p.k}, {"predictions", preds}};
    if (!p.dataset.empty()) doc["dataset"] = p.dataset;
    return doc;
}

PredictionSet load_prediction_set(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open prediction set " + path.string());
    try {
        return prediction_set_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError("cannot parse " + path.string() + ": " + e.what());
    }
}

namespace {

void check_coverage(const Dataset& expert, const PredictionSet& p) {
    std::set<std::int64_t> expected;
    for (const auto& r : expert.records) {
        if (r.excluded) continue;
        if (std::any_of(kAllConcepts.begin(), kAllConcepts.end(), [&](Concept c) { return r.expert_label[c].has_value(); }))
            expected.insert(r.id);
    }
    std::vector<std::int64_t> missing, extra;
    for (auto id : expected)
        if (!p.predictions.contains(id)) missing.push_back(id);
    for (const auto& [id, labels] : p.predictions)
        if (!expected.contains(id)) extra.push_back(id);
    if (missing.empty() && extra.empty()) return;
    auto list = [](const std::vector<std::int64_t>& ids) {
        std::string s;
        for (std::size_t i = 0; i < ids.size() && i < 20; ++i) s += (i ? "," : "") + std::to_string(ids[i]);
        if (ids.size() > 20) s += ",...";
        return "[" + s + "]";
    };
    throw Error("prediction set " + p.model + "/" + p.strategy + "/k=" + std::to_string(p.k) +
                " does not match the expert sentences: missing " + list(missing) + ", unexpected " + list(extra));
}

}  // namespace

Accuracy score_predictions(const Dataset& expert, const PredictionSet& p, Concept c) {
    check_coverage(expert, p);
    Accuracy a;
    for (const auto& r : expert.records) {
        if (r.excluded || !r.expert_label[c]) continue;
        ++a.total;
        const auto& predicted = p.predictions.at(r.id)[c];
        if (!predicted)
            ++a.unlabeled;
        else if (*predicted == *r.expert_label[c])
            ++a.matches;
    }
    if (a.total == 0) throw Error("no expert labels for " + std::string(concept_id(c)));
    a.centi_percent = centi_percent(a.matches, a.total);
    return a;
}

AccuracyReport compare(const Dataset& expert, const std::vector<PredictionSet>& sets) {
    AccuracyReport report;
    for (const auto& p : sets) {
        AccuracyRow row;
        row.dataset = p.dataset;
        row.model = p.model;
        row.strategy = p.strategy;
        row.k = p.k;
        std::vector<std::int64_t> centis;
        for (Concept c : kAllConcepts) {
            row.concepts[c] = score_predictions(expert, p, c);
            centis.push_back(row.concepts[c].centi_percent);
        }
        row.average_centi = centi_mean(centis);
        report.rows.push_back(std::move(row));
    }
    flag_winners(report);
    return report;
}

void merge(AccuracyReport& a, const AccuracyReport& b) {
    a.rows.insert(a.rows.end(), b.rows.begin(), b.rows.end());
    flag_winners(a);
}

void flag_winners(AccuracyReport& report) {
    auto value = [](const AccuracyRow& r, std::size_t col) {
        return col < kConceptCount ? r.concepts[kAllConcepts[col]].centi_percent : r.average_centi;
    };
    for (auto& row : report.rows) row.winner.fill(false);
    for (auto& row : report.rows) {
        for (std::size_t col = 0; col < 5; ++col) {
            std::int64_t best = value(row, col);
            for (const auto& other : report.rows)
                if (other.dataset == row.dataset && other.k == row.k) best = std::max(best, value(other, col));
            row.winner[col] = value(row, col) == best;
        }
    }
}

std::string render_table(const AccuracyReport& report) {
    std::ostringstream os;
    auto cell = [](std::int64_t centi, bool win) {
        std::string s = format_centi(centi) + (win ? "*" : " ");
        return std::string(s.size() < 8 ? 8 - s.size() : 0, ' ') + s;
    };
    os << std::left << std::setw(8) << "dataset" << std::setw(10) << "model" << std::setw(9) << "strategy"
       << std::setw(4) << "k" << std::right << std::setw(8) << "trust" << std::setw(8) << "satis" << std::setw(8)
       << "commit" << std::setw(8) << "c.m." << std::setw(8) << "average" << std::setw(11) << "unlabeled" << '\n';
    for (const auto& r : report.rows) {
        os << std::left << std::setw(8) << r.dataset << std::setw(10) << r.model << std::setw(9) << r.strategy
           << std::setw(4) << r.k << std::right;
        std::size_t unlabeled = 0;
        for (std::size_t i = 0; i < kConceptCount; ++i) {
            const auto& a = r.concepts[kAllConcepts[i]];
            os << cell(a.centi_percent, r.winner[i]);
            unlabeled += a.unlabeled;
        }
        os << cell(r.average_centi, r.winner[4]) << std::setw(11) << unlabeled << '\n';
    }
    return os.str();
}

json to_json(const AccuracyReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        json concepts = json::object();
        for (std::size_t i = 0; i < kConceptCount; ++i) {
            const Concept c = kAllConcepts[i];
            const auto& a = r.concepts[c];
            concepts[std::string(concept_id(c))] = {{"accuracy", format_centi(a.centi_percent)},
                                                    {"matches", a.matches},
                                                    {"total", a.total},
                                                    {"unlabeled", a.unlabeled},
                                                    {"winner", r.winner[i]}};
        }
        rows.push_back({{"dataset", r.dataset},
                        {"model", r.model},
                        {"strategy", r.strategy},
                        {"k", r.k},
                        {"concepts", concepts},
                        {"average", format_centi(r.average_centi)},
                        {"average_winner", r.winner[4]}});
    }
    return {{"rows", rows}};
}

}  // namespace opra
