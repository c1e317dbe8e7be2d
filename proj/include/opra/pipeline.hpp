#pragma once

#include "opra/corpus.hpp"
#include "opra/providers.hpp"

// Dataset-wide provider passes.

namespace opra {

/// Embeds every active record that has no embedding yet (all when `force`).
std::size_t embed_all(Dataset& ds, const Embedder& embedder, bool force = false);

/// Classifies every active record; returns how many used the fallback.
std::size_t classify_all(Dataset& ds, const SentimentClassifier& classifier);

}  // namespace opra
