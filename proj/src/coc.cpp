#include "opra/coc.hpp"

#include "opra/kernels.hpp"
#include "opra/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace opra {

using nlohmann::json;

InstructionKey make_key(Embedding values) {
    double sq = 0.0;
    for (double v : values) sq += v * v;
    return {std::move(values), std::sqrt(sq)};
}

double instruction_weight(std::span<const double> h, const ExpertInstruction& instruction) {
    const auto& keys = instruction.keys;
    if (keys.empty()) throw Error("expert instruction has no keys: \"" + instruction.text + "\"");
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(h.size()));

    std::vector<double> scores(keys.size());
    double top = -INFINITY;
    for (std::size_t k = 0; k < keys.size(); ++k) {
        if (keys[k].values.size() != h.size())
            throw Error("key dimension " + std::to_string(keys[k].values.size()) + " does not match embedding dimension " +
                        std::to_string(h.size()));
        double dot = 0.0;
        for (std::size_t d = 0; d < h.size(); ++d) dot += h[d] * keys[k].values[d];
        scores[k] = dot * inv_sqrt_d;
        top = std::max(top, scores[k]);
    }
    double z = 0.0;
    for (auto& s : scores) {
        s = std::exp(s - top);
        z += s;
    }
    double best = 0.0;
    for (std::size_t k = 0; k < keys.size(); ++k) best = std::max(best, scores[k] / z * keys[k].norm);
    return best;
}

double concept_weight(std::span<const double> h, std::span<const ExpertInstruction> instructions) {
    if (instructions.empty()) throw Error("concept-label has no instructions");
    const auto& first = instructions.front();
    double sum = 0.0;
    for (const auto& ins : instructions) {
        if (ins.concept_id != first.concept_id || ins.label != first.label)
            throw Error("instructions mix concepts or label sides");
        sum += instruction_weight(h, ins);
    }
    return sum / static_cast<double>(instructions.size());
}

double coc_from_weights(double w_true, double w_false) {
    if (!(w_true >= 0.0) || !(w_false >= 0.0)) throw std::logic_error("negative concept weight");
    const double total = w_true + w_false;
    if (!(total > 0.0)) return 0.5;
    // q <= 0.5, so q on the 2^-53 grid makes 1 - q exact.
    const double q = std::ldexp(std::round(std::ldexp(std::min(w_true, w_false) / total, 53)), -53);
    return w_true <= w_false ? q : 1.0 - q;
}

double coc_raw(std::span<const double> h, const ConceptSpec& spec) {
    return coc_from_weights(concept_weight(h, spec.true_side), concept_weight(h, spec.false_side));
}

ScalingParams fit_scaling(std::span<const double> raw) {
    ScalingParams p;
    if (raw.empty()) return p;
    const double n = static_cast<double>(raw.size());
    for (double v : raw) p.mean += v;
    p.mean /= n;
    double var = 0.0;
    for (double v : raw) var += (v - p.mean) * (v - p.mean);
    p.std = std::sqrt(var / n);
    if (p.std == 0.0) return p;
    p.min = INFINITY;
    p.max = -INFINITY;
    for (double v : raw) {
        const double z = (v - p.mean) / p.std;
        p.min = std::min(p.min, z);
        p.max = std::max(p.max, z);
    }
    return p;
}

double apply_scaling(double raw, const ScalingParams& p) {
    if (p.std == 0.0 || p.max == p.min) return 0.5;
    const double z = (raw - p.mean) / p.std;
    return std::clamp((z - p.min) / (p.max - p.min), 0.0, 1.0);
}

CoCMatrix rescale(std::vector<std::int64_t> ids, std::vector<Concept> concepts, Matrix raw) {
    if (raw.rows() != ids.size() || raw.cols() != concepts.size())
        throw Error("rescale: raw matrix shape does not match ids/concepts");
    CoCMatrix m;
    m.ids = std::move(ids);
    m.concepts = std::move(concepts);
    m.scaled = Matrix(raw.rows(), raw.cols());
    std::vector<double> column(raw.rows());
    for (std::size_t c = 0; c < raw.cols(); ++c) {
        for (std::size_t r = 0; r < raw.rows(); ++r) column[r] = raw(r, c);
        const ScalingParams p = fit_scaling(column);
        for (std::size_t r = 0; r < raw.rows(); ++r) m.scaled(r, c) = apply_scaling(column[r], p);
        m.params.push_back(p);
    }
    m.raw = std::move(raw);
    return m;
}

ExpertInstruction embed_instruction(Concept c, LabelSide side, std::string text, const Embedder& embedder) {
    ExpertInstruction ins;
    ins.concept_id = c;
    ins.label = side;
    for (const auto& token : text::basic_tokens(text)) ins.keys.push_back(make_key(embedder.embed(token)));
    if (ins.keys.empty()) throw Error("expert instruction has no tokens: \"" + text + "\"");
    ins.text = std::move(text);
    return ins;
}

std::vector<ConceptSpec> instructions_from_json(const json& doc, const Embedder& embedder) {
    if (!doc.is_array()) throw ParseError("expert instruction file must be a JSON list");
    std::vector<ConceptSpec> specs;
    for (const auto& item : doc) {
        Concept c;
        std::string label;
        std::string body;
        try {
            c = require_concept(item.at("concept").get<std::string>());
            label = item.at("label").get<std::string>();
            body = item.at("text").get<std::string>();
        } catch (const json::exception& e) {
            throw ParseError(std::string("malformed expert instruction: ") + e.what());
        }
        if (label != "true" && label != "false") throw ParseError("instruction label must be \"true\" or \"false\"");
        const LabelSide side = label == "true" ? LabelSide::true_side : LabelSide::false_side;
        auto it = std::find_if(specs.begin(), specs.end(), [c](const ConceptSpec& s) { return s.id == c; });
        if (it == specs.end()) {
            specs.push_back(ConceptSpec{c, {}, {}});
            it = specs.end() - 1;
        }
        auto& bucket = side == LabelSide::true_side ? it->true_side : it->false_side;
        bucket.push_back(embed_instruction(c, side, std::move(body), embedder));
    }
    std::sort(specs.begin(), specs.end(), [](const ConceptSpec& a, const ConceptSpec& b) { return a.id < b.id; });
    return specs;
}

std::vector<ConceptSpec> load_instructions(const std::filesystem::path& path, const Embedder& embedder) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open instruction file " + path.string());
    try {
        return instructions_from_json(json::parse(in), embedder);
    } catch (const json::parse_error& e) {
        throw ParseError("cannot parse " + path.string() + ": " + e.what());
    }
}

CoCMatrix compute_coc(Dataset& ds, std::span<const ConceptSpec> specs) {
    std::vector<std::int64_t> ids;
    std::vector<std::vector<double>> sentences;
    for (const auto& r : ds.records) {
        if (r.excluded) continue;
        if (r.embedding.empty()) throw Error("embed before computing CoC (record " + std::to_string(r.id) + ")");
        ids.push_back(r.id);
        sentences.push_back(r.embedding);
    }
    if (ids.empty()) throw Error("no active sentences to score");

    std::vector<Concept> concepts;
    Matrix raw(ids.size(), specs.size());
    for (std::size_t c = 0; c < specs.size(); ++c) {
        if (specs[c].true_side.empty() || specs[c].false_side.empty())
            throw Error("concept " + std::string(concept_id(specs[c].id)) + " needs instructions for both labels");
        concepts.push_back(specs[c].id);
        const auto column = kernels::coc_raw_batch(sentences, specs[c]);
        for (std::size_t r = 0; r < ids.size(); ++r) raw(r, c) = column[r];
    }
    CoCMatrix m = rescale(ids, concepts, std::move(raw));

    for (auto& r : ds.records) {
        for (Concept c : concepts) {
            r.coc[c].reset();
            r.coc_raw[c].reset();
        }
    }
    for (std::size_t c = 0; c < concepts.size(); ++c) ds.coc_scaling[concepts[c]] = m.params[c];
    for (std::size_t row = 0; row < m.ids.size(); ++row) {
        SentenceRecord* rec = ds.find(m.ids[row]);
        for (std::size_t c = 0; c < concepts.size(); ++c) {
            rec->coc_raw[concepts[c]] = m.raw(row, c);
            rec->coc[concepts[c]] = m.scaled(row, c);
        }
    }
    return m;
}

}  // namespace opra
