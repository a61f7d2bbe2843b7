#pragma once

// Reference-free baselines: novel n-gram rate against the article and
// summary length in whitespace tokens.

#include <harim/detail/text.hpp>
#include <harim/error.hpp>
#include <harim/likelihood_store.hpp>

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace harim {

enum class NgramDenominator {
    article,  ///< |set(article n-grams)|
    output    ///< |set(summary n-grams)|, bounds the score to [-1, 0]
};

inline std::string_view to_string(NgramDenominator d) {
    return d == NgramDenominator::article ? "article" : "output";
}

inline std::optional<NgramDenominator> parse_denominator(std::string_view name) {
    if (name == "article") return NgramDenominator::article;
    if (name == "output") return NgramDenominator::output;
    return std::nullopt;
}

struct NgramConfig {
    int n = 2;
    bool lowercase = true;
    NgramDenominator denominator = NgramDenominator::article;
};

/// Whitespace tokens, ASCII-lowercased on request.
inline std::vector<std::string> tokenize(std::string_view text, bool lowercase = true) {
    auto tokens = detail::split_whitespace(text);
    if (lowercase)
        for (auto& t : tokens) t = detail::to_lower_ascii(std::move(t));
    return tokens;
}

namespace detail {

inline bool closes_sentence(std::string_view token) {
    const char c = token.back();
    return c == '.' || c == '!' || c == '?';
}

}  // namespace detail

/// Distinct n-grams of a token sequence. N-grams do not span a token ending
/// in '.', '!' or '?' and the next token, so repeating a sentence adds nothing.
inline std::unordered_set<std::string> ngram_set(std::span<const std::string> tokens, int n) {
    if (n < 1) throw ValidationError("n-gram order must be >= 1");
    const auto order = static_cast<std::size_t>(n);
    std::unordered_set<std::string> out;
    std::size_t start = 0;
    while (start < tokens.size()) {
        std::size_t end = start;
        while (end < tokens.size() && !detail::closes_sentence(tokens[end])) ++end;
        end = std::min(end + 1, tokens.size());  // sentence is [start, end)
        for (std::size_t i = start; i + order <= end; ++i) {
            std::string gram = tokens[i];
            for (std::size_t j = 1; j < order; ++j) (gram += ' ') += tokens[i + j];
            out.insert(std::move(gram));
        }
        start = end;
    }
    return out;
}

/// Negated share of summary n-grams that never occur in the article.
/// Zero means fully extractive; more negative means more novel wording.
inline double novel_ngram(std::string_view article, std::string_view summary, const NgramConfig& cfg = {}) {
    if (cfg.n < 1) throw ValidationError("n-gram order must be >= 1");
    const auto article_set = ngram_set(tokenize(article, cfg.lowercase), cfg.n);
    const auto summary_set = ngram_set(tokenize(summary, cfg.lowercase), cfg.n);
    if (article_set.empty())
        throw ValidationError("article has no " + std::to_string(cfg.n) + "-grams");
    if (summary_set.empty())
        throw ValidationError("summary has no " + std::to_string(cfg.n) + "-grams");

    std::size_t novel = 0;
    for (const auto& g : summary_set)
        if (!article_set.count(g)) ++novel;
    const auto denom = cfg.denominator == NgramDenominator::article ? article_set.size()
                                                                     : summary_set.size();
    if (novel == 0) return 0.0;
    return -static_cast<double>(novel) / static_cast<double>(denom);
}

inline double novel_ngram(const AnnotatedPair& pair, const NgramConfig& cfg = {}) {
    try {
        return novel_ngram(pair.article, pair.summary, cfg);
    } catch (const ValidationError& e) {
        throw ValidationError("pair '" + pair.id + "': " + e.what());
    }
}

/// Whitespace token count of the summary.
inline double length_metric(const AnnotatedPair& pair) {
    return static_cast<double>(detail::split_whitespace(pair.summary).size());
}

inline ScoreTable novel_ngram_table(std::span<const AnnotatedPair> pairs, const NgramConfig& cfg = {}) {
    ScoreTable table("novel_ngram_" + std::to_string(cfg.n));
    for (const auto& p : pairs) table.insert(p.id, novel_ngram(p, cfg));
    return table;
}

inline ScoreTable length_table(std::span<const AnnotatedPair> pairs) {
    ScoreTable table("length");
    for (const auto& p : pairs) table.insert(p.id, length_metric(p));
    return table;
}

}  // namespace harim
