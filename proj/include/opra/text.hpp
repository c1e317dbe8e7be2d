#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

// Text normalization shared by pruning, sentiment, embeddings and tag clouds.

namespace opra::text {

/// Lowercases, drops apostrophes, and replaces every codepoint that is not a
/// letter, digit or whitespace with a space, then splits on whitespace.
/// Non-ASCII letters are recognized in the Latin-1/Latin Extended-A/B blocks;
/// everything else outside ASCII (emoji, symbols, CJK punctuation) is dropped.
std::vector<std::string> basic_tokens(std::string_view input);

/// Number of basic tokens that contain at least one letter.
std::size_t alphabetic_token_count(std::string_view input);

/// Strips plural "-s"/"-es"/"-ies", "-ing" and "-ed" suffixes.
std::string lemma_lite(std::string_view token);

bool is_stopword(std::string_view token);

struct ContentOptions {
    std::size_t min_length = 3;
    /// Tokens kept even if they are stopwords or short (matched before stemming).
    std::set<std::string> keep_list;
};

/// Basic tokens with stopwords and short tokens removed, then stemmed.
std::vector<std::string> content_tokens(std::string_view input, const ContentOptions& options = {});

/// Splits on whitespace without any normalization.
std::vector<std::string> whitespace_tokens(std::string_view input);

std::string trim(std::string_view s);

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::string_view data);

/// Lower-case, zero-padded 16-digit hex.
std::string hex64(std::uint64_t value);

/// hex64(fnv1a64(prompt)); the key format of mock script files.
std::string fingerprint(std::string_view prompt);

}  // namespace opra::text
