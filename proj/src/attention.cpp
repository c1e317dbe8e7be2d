#include "opra/attention.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace opra {

using nlohmann::json;

namespace {

std::string_view strip_token(std::string_view tok) {
    for (std::string_view mark : {std::string_view("\xE2\x96\x81"), std::string_view("\xC4\xA0")})
        while (tok.substr(0, mark.size()) == mark) tok.remove_prefix(mark.size());
    while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.front()))) tok.remove_prefix(1);
    while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back()))) tok.remove_suffix(1);
    return tok;
}

}  // namespace

std::vector<TokenSpan> sentence_spans(std::span<const std::string> token_texts, std::string_view full_text,
                                      std::span<const Sentence> sentences) {
    if (sentences.empty()) throw Error("transcript has no sentences");
    std::vector<TokenSpan> spans(sentences.size());
    for (std::size_t s = 0; s < sentences.size(); ++s) spans[s].sentence_id = sentences[s].id;

    std::vector<std::size_t> owner(token_texts.size());
    std::size_t offset = 0;
    std::size_t current = 0;
    for (std::size_t t = 0; t < token_texts.size(); ++t) {
        const std::string_view tok = strip_token(token_texts[t]);
        if (!tok.empty()) {
            while (offset < full_text.size() && std::isspace(static_cast<unsigned char>(full_text[offset]))) ++offset;
            if (full_text.substr(offset, tok.size()) != tok)
                throw AlignmentError(offset, "token " + std::to_string(t) + " \"" + std::string(tok) +
                                                 "\" does not match the text");
            while (current + 1 < sentences.size() && sentences[current + 1].begin <= offset) ++current;
            offset += tok.size();
        }
        owner[t] = current;
    }
    while (offset < full_text.size() && std::isspace(static_cast<unsigned char>(full_text[offset]))) ++offset;
    if (offset != full_text.size()) throw AlignmentError(offset, "text continues past the last token");

    std::size_t t = 0;
    for (std::size_t s = 0; s < sentences.size(); ++s) {
        spans[s].begin = t;
        while (t < owner.size() && owner[t] == s) ++t;
        spans[s].end = t;
    }
    return spans;
}

std::string_view exclusion_name(ExclusionReason r) {
    return r == ExclusionReason::instruction_sentence ? "instruction_sentence" : "self_reference";
}

AttentionSummary aggregate_isa(const Matrix& attention, std::span<const TokenSpan> spans) {
    const std::size_t tokens = spans.empty() ? 0 : spans.back().end;
    if (attention.rows() != tokens || attention.cols() != tokens)
        throw Error("attention is " + std::to_string(attention.rows()) + "x" + std::to_string(attention.cols()) +
                    " but the transcript has " + std::to_string(tokens) + " tokens");
    AttentionSummary s;
    s.available = true;
    const std::size_t n = spans.size();
    s.isa = Matrix(n, n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        s.ids.push_back(spans[a].sentence_id);
        const std::size_t width = spans[a].end - spans[a].begin;
        if (width == 0) continue;
        for (std::size_t b = 0; b < n; ++b) {
            double total = 0.0;
            for (std::size_t t = spans[a].begin; t < spans[a].end; ++t)
                for (std::size_t src = spans[b].begin; src < spans[b].end; ++src) total += attention(t, src);
            s.isa(a, b) = total / static_cast<double>(width);
        }
    }
    s.generated.assign(n, false);
    if (n > 0) s.instruction_excluded.push_back(0);
    return s;
}

AttentionSummary summarize(const AssessmentResult& result) {
    AttentionSummary s;
    if (result.attention) {
        const std::string full = result.prompt + result.continuation;
        const auto spans = sentence_spans(result.token_texts, full, result.transcript);
        s = aggregate_isa(*result.attention, spans);
    } else {
        for (const auto& sentence : result.transcript) s.ids.push_back(sentence.id);
        s.available = false;
        if (!s.ids.empty()) s.instruction_excluded.push_back(0);
    }
    s.generated.clear();
    for (const auto& sentence : result.transcript) s.generated.push_back(sentence.generated);
    return s;
}

std::optional<std::size_t> AuditView::top() const {
    for (const auto& inf : influences)
        if (inf.rank == 1u) return inf.id;
    return std::nullopt;
}

AuditView audit_view(const AttentionSummary& summary, std::size_t g) {
    AuditView view;
    view.generated_id = g;
    view.available = summary.available;
    if (g >= summary.ids.size()) throw Error("sentence " + std::to_string(g) + " is not in the transcript");
    if (g >= summary.generated.size() || !summary.generated[g])
        throw Error("sentence " + std::to_string(g) + " was not generated");
    if (!summary.available) return view;

    for (std::size_t b = 0; b <= g; ++b) {
        Influence inf;
        inf.id = summary.ids[b];
        inf.isa = summary.isa(g, b);
        if (std::find(summary.instruction_excluded.begin(), summary.instruction_excluded.end(), b) !=
            summary.instruction_excluded.end())
            inf.excluded = ExclusionReason::instruction_sentence;
        else if (b == g)
            inf.excluded = ExclusionReason::self_reference;
        view.influences.push_back(inf);
    }

    std::vector<Influence*> ranked;
    for (auto& inf : view.influences)
        if (!inf.excluded) ranked.push_back(&inf);
    std::stable_sort(ranked.begin(), ranked.end(), [](const Influence* a, const Influence* b) { return a->isa > b->isa; });
    const double strongest = ranked.empty() ? 0.0 : ranked.front()->isa;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        ranked[r]->rank = r + 1;
        const double rel = strongest > 0.0 ? ranked[r]->isa / strongest : 0.0;
        ranked[r]->bucket = std::min(4, static_cast<int>(std::floor(rel * 5.0)));
    }
    return view;
}

json to_json(const AuditView& view) {
    json influences = json::array();
    for (const auto& inf : view.influences) {
        json j{{"id", inf.id}, {"isa", inf.isa}, {"excluded", inf.excluded.has_value()}};
        j["rank"] = inf.rank ? json(*inf.rank) : json(nullptr);
        if (inf.bucket) j["bucket"] = *inf.bucket;
        if (inf.excluded) j["reason"] = exclusion_name(*inf.excluded);
        influences.push_back(std::move(j));
    }
    return {{"generated_id", view.generated_id}, {"influences", influences}, {"available", view.available}};
}

}  // namespace opra
