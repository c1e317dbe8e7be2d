#include "opra/pipeline.hpp"

namespace opra {

std::size_t embed_all(Dataset& ds, const Embedder& embedder, bool force) {
    std::size_t count = 0;
    for (auto& r : ds.records) {
        if (r.excluded || (!force && !r.embedding.empty())) continue;
        r.embedding = embedder.embed(r.text);
        ++count;
    }
    return count;
}

std::size_t classify_all(Dataset& ds, const SentimentClassifier& classifier) {
    std::size_t fallbacks = 0;
    for (auto& r : ds.records) {
        if (r.excluded) continue;
        const SentimentResult s = classifier.classify(r.text);
        r.sentiment = s.label == SentimentLabel::positive ? Sentiment::positive : Sentiment::negative;
        r.sentiment_probability = s.probability;
        if (s.fallback) ++fallbacks;
    }
    return fallbacks;
}

}  // namespace opra
