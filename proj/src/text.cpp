#include "opra/text.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <unordered_set>

namespace opra::text {
namespace {

// Decodes one UTF-8 codepoint starting at i; invalid bytes decode as U+FFFD.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    for (std::size_t k = 1; k < len; ++k) {
        const int c = cont(k);
        if (c < 0) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | static_cast<char32_t>(c);
    }
    i += len;
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_latin_letter(char32_t cp) {
    if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return true;
    if (cp >= 0xC0 && cp <= 0x24F) return cp != 0xD7 && cp != 0xF7;
    return false;
}

bool is_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
    if (cp >= 0x100 && cp <= 0x17F && (cp % 2 == 0)) return cp + 1;
    return cp;
}

bool is_apostrophe(char32_t cp) { return cp == '\'' || cp == 0x2019 || cp == 0x2018; }

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

const std::unordered_set<std::string_view>& stopwords() {
    static const std::unordered_set<std::string_view> words{
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "arent",
        "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by",
        "can", "cant", "could", "couldnt", "did", "didnt", "do", "does", "doesnt", "doing", "dont", "down",
        "during", "each", "few", "for", "from", "further", "had", "hadnt", "has", "hasnt", "have", "havent",
        "having", "he", "hed", "hell", "her", "here", "heres", "hers", "herself", "hes", "him", "himself",
        "his", "how", "hows", "i", "id", "if", "ill", "im", "in", "into", "is", "isnt", "it", "its",
        "itself", "ive", "just", "lets", "me", "more", "most", "my", "myself", "no", "nor", "not", "of",
        "off", "on", "once", "only", "or", "other", "ought", "our", "ours", "ourselves", "out", "over", "own",
        "same", "she", "shed", "shell", "shes", "should", "shouldnt", "so", "some", "such", "than", "that",
        "thats", "the", "their", "theirs", "them", "themselves", "then", "there", "theres", "these", "they",
        "theyd", "theyll", "theyre", "theyve", "this", "those", "through", "to", "too", "under", "until",
        "up", "very", "was", "wasnt", "we", "wed", "well", "were", "werent", "weve", "what", "whats", "when",
        "whens", "where", "wheres", "which", "while", "who", "whom", "whos", "why", "whys", "will", "with",
        "wont", "would", "wouldnt", "you", "youd", "youll", "your", "youre", "yours", "yourself",
        "yourselves", "youve", "also", "get", "got", "really", "much", "even", "still", "one", "two"};
    return words;
}

}  // namespace

std::vector<std::string> basic_tokens(std::string_view input) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    std::size_t i = 0;
    while (i < input.size()) {
        const char32_t cp = decode_utf8(input, i);
        if (is_apostrophe(cp)) continue;
        if (is_latin_letter(cp) || is_digit(cp)) {
            append_utf8(current, to_lower(cp));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

std::size_t alphabetic_token_count(std::string_view input) {
    std::size_t count = 0;
    for (const auto& token : basic_tokens(input)) {
        std::size_t i = 0;
        bool has_letter = false;
        while (i < token.size() && !has_letter) has_letter = is_latin_letter(decode_utf8(token, i));
        if (has_letter) ++count;
    }
    return count;
}

std::string lemma_lite(std::string_view token) {
    std::string t(token);
    if (t.size() > 4 && ends_with(t, "ies")) return t.substr(0, t.size() - 3) + "y";
    if (t.size() > 5 && ends_with(t, "ing")) return t.substr(0, t.size() - 3);
    if (t.size() > 4 && ends_with(t, "ed") && !ends_with(t, "eed")) return t.substr(0, t.size() - 2);
    if (t.size() > 4 && (ends_with(t, "ches") || ends_with(t, "shes") || ends_with(t, "xes") || ends_with(t, "sses")))
        return t.substr(0, t.size() - 2);
    if (t.size() > 3 && ends_with(t, "s") && !ends_with(t, "ss") && !ends_with(t, "us") && !ends_with(t, "is"))
        return t.substr(0, t.size() - 1);
    return t;
}

bool is_stopword(std::string_view token) { return stopwords().contains(token); }

std::vector<std::string> content_tokens(std::string_view input, const ContentOptions& options) {
    std::vector<std::string> out;
    for (auto& token : basic_tokens(input)) {
        if (options.keep_list.contains(token)) {
            out.push_back(std::move(token));
            continue;
        }
        if (is_stopword(token) || token.size() < options.min_length) continue;
        out.push_back(lemma_lite(token));
    }
    return out;
}

std::vector<std::string> whitespace_tokens(std::string_view input) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < input.size()) {
        while (i < input.size() && std::isspace(static_cast<unsigned char>(input[i]))) ++i;
        const std::size_t start = i;
        while (i < input.size() && !std::isspace(static_cast<unsigned char>(input[i]))) ++i;
        if (i > start) out.emplace_back(input.substr(start, i - start));
    }
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (char ch : data) {
        hash ^= static_cast<unsigned char>(ch);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string hex64(std::uint64_t value) {
    std::array<char, 17> buf{};
    std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(value));
    return std::string(buf.data(), 16);
}

std::string fingerprint(std::string_view prompt) { return hex64(fnv1a64(prompt)); }

}  // namespace opra::text
