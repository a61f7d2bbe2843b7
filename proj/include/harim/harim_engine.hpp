#pragma once

// Hallucination-risk scores computed from teacher-forced token likelihoods.
//
// For every summary token the risk term is
//
//     (1 - p_s2s) * (1 - (p_s2s - p_lm))^k
//
// where p_s2s is the token probability given the article and p_lm the same
// model's probability given an empty source. HaRiM aggregates the terms over
// the summary (mean by default) and HaRiM+ combines it with the mean token
// log-likelihood:
//
//     harim_plus = mean(log p_s2s) - lambda * harim
//
// harim is a risk (lower is better) while every ScoreTable produced here is
// oriented higher-is-better, so the standalone `harim` variant is negated.

#include <harim/error.hpp>
#include <harim/likelihood_store.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace harim {

/// Probabilities may exceed [0,1] by this much before being rejected.
inline constexpr double kProbTolerance = 1e-9;

enum class Aggregation { mean, sum, top5_mean, bot5_mean };

inline std::string_view to_string(Aggregation a) {
    switch (a) {
        case Aggregation::mean: return "mean";
        case Aggregation::sum: return "sum";
        case Aggregation::top5_mean: return "top5_mean";
        case Aggregation::bot5_mean: return "bot5_mean";
    }
    return "?";
}

inline std::optional<Aggregation> parse_aggregation(std::string_view name) {
    for (auto a : {Aggregation::mean, Aggregation::sum, Aggregation::top5_mean, Aggregation::bot5_mean})
        if (to_string(a) == name) return a;
    return std::nullopt;
}

struct HarimConfig {
    double lambda = 7.0;
    Aggregation aggregation = Aggregation::mean;
    int delta_exponent = 1;
};

inline void validate(const HarimConfig& cfg) {
    if (!std::isfinite(cfg.lambda) || cfg.lambda < 0.0)
        throw ValidationError("lambda must be a finite value >= 0");
    if (cfg.delta_exponent < 1) throw ValidationError("delta exponent must be >= 1");
}

enum class VariantId {
    harim,
    harim_plus,
    loglik,
    loglik_sum,
    h_s2s,
    h_lm,
    h_ratio_log,
    h_product,
    delta_len
};

inline constexpr VariantId kAllVariants[] = {
    VariantId::harim,  VariantId::harim_plus,  VariantId::loglik,
    VariantId::loglik_sum, VariantId::h_s2s,   VariantId::h_lm,
    VariantId::h_ratio_log, VariantId::h_product, VariantId::delta_len};

inline std::string_view to_string(VariantId v) {
    switch (v) {
        case VariantId::harim: return "harim";
        case VariantId::harim_plus: return "harim_plus";
        case VariantId::loglik: return "loglik";
        case VariantId::loglik_sum: return "loglik_sum";
        case VariantId::h_s2s: return "h_s2s";
        case VariantId::h_lm: return "h_lm";
        case VariantId::h_ratio_log: return "h_ratio_log";
        case VariantId::h_product: return "h_product";
        case VariantId::delta_len: return "delta_len";
    }
    return "?";
}

inline std::optional<VariantId> parse_variant(std::string_view name) {
    for (auto v : kAllVariants)
        if (to_string(v) == name) return v;
    return std::nullopt;
}

inline bool needs_entropy(VariantId v) {
    return v == VariantId::h_s2s || v == VariantId::h_lm || v == VariantId::h_ratio_log ||
           v == VariantId::h_product;
}

namespace detail {

inline double checked_probability(double p, std::string_view name) {
    if (!(p >= -kProbTolerance && p <= 1.0 + kProbTolerance))
        throw ValidationError(std::string(name) + " = " + format_double(p) + " is not a probability");
    return std::clamp(p, 0.0, 1.0);
}

inline double ipow(double base, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= base;
    return r;
}

}  // namespace detail

/// Risk contributed by one token. Lies in [0, 2^k]; zero when p_s2s = 1.
inline double harim_token_term(double p_s2s, double p_lm, int k = 1) {
    if (k < 1) throw ValidationError("delta exponent must be >= 1");
    p_s2s = detail::checked_probability(p_s2s, "p_s2s");
    p_lm = detail::checked_probability(p_lm, "p_lm");
    const double delta = p_s2s - p_lm;
    return (1.0 - p_s2s) * detail::ipow(1.0 - delta, k);
}

/// Token-level risk terms of a record, in token order.
inline std::vector<double> harim_token_terms(const LikelihoodRecord& rec, int k = 1) {
    std::vector<double> terms(rec.size());
    for (std::size_t i = 0; i < rec.size(); ++i)
        terms[i] = harim_token_term(std::exp(rec.logp_s2s[i]), std::exp(rec.logp_lm[i]), k);
    return terms;
}

/// Collapses token terms to a scalar. The top/bottom-5 variants average the
/// five largest/smallest terms, or all of them when fewer than five exist.
inline double aggregate(std::span<const double> terms, Aggregation how) {
    if (terms.empty()) throw ValidationError("cannot aggregate an empty token sequence");
    const auto mean_of = [](std::span<const double> v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    switch (how) {
        case Aggregation::mean: return mean_of(terms);
        case Aggregation::sum: return std::accumulate(terms.begin(), terms.end(), 0.0);
        case Aggregation::top5_mean:
        case Aggregation::bot5_mean: {
            std::vector<double> sorted(terms.begin(), terms.end());
            const std::size_t m = std::min<std::size_t>(5, sorted.size());
            if (how == Aggregation::top5_mean)
                std::partial_sort(sorted.begin(), sorted.begin() + m, sorted.end(), std::greater<>{});
            else
                std::partial_sort(sorted.begin(), sorted.begin() + m, sorted.end());
            return mean_of(std::span<const double>(sorted.data(), m));
        }
    }
    return 0.0;
}

/// Hallucination risk of a summary; higher means more risk.
inline double hallucination_risk(const LikelihoodRecord& rec, const HarimConfig& cfg = {}) {
    validate(cfg);
    if (rec.size() == 0) throw ValidationError("record '" + rec.id + "' has no tokens");
    const auto terms = harim_token_terms(rec, cfg.delta_exponent);
    return aggregate(terms, cfg.aggregation);
}

/// Sum of log p_s2s, divided by the token count when `normalize` is set.
inline double loglik(const LikelihoodRecord& rec, bool normalize = true) {
    if (rec.size() == 0) throw ValidationError("record '" + rec.id + "' has no tokens");
    const double total = std::accumulate(rec.logp_s2s.begin(), rec.logp_s2s.end(), 0.0);
    return normalize ? total / static_cast<double>(rec.size()) : total;
}

inline double harim_plus(const LikelihoodRecord& rec, const HarimConfig& cfg = {}) {
    return loglik(rec, true) - cfg.lambda * hallucination_risk(rec, cfg);
}

namespace detail {

inline double entropy_sum(const LikelihoodRecord& rec, const std::optional<std::vector<double>>& h,
                          std::string_view name) {
    if (!h)
        throw ValidationError("record '" + rec.id + "' has no " + std::string(name) +
                              " (required by entropy-based variants)");
    return std::accumulate(h->begin(), h->end(), 0.0);
}

}  // namespace detail

/// One higher-is-better score per record for any of the implemented variants.
inline double score_variant(const LikelihoodRecord& rec, VariantId variant, const HarimConfig& cfg = {}) {
    double value = 0.0;
    switch (variant) {
        case VariantId::harim: value = -hallucination_risk(rec, cfg); break;
        case VariantId::harim_plus: value = harim_plus(rec, cfg); break;
        case VariantId::loglik: value = loglik(rec, true); break;
        case VariantId::loglik_sum: value = loglik(rec, false); break;
        case VariantId::h_s2s: value = -detail::entropy_sum(rec, rec.entropy_s2s, "entropy_s2s"); break;
        case VariantId::h_lm: value = -detail::entropy_sum(rec, rec.entropy_lm, "entropy_lm"); break;
        case VariantId::h_ratio_log: {
            const double hs = detail::entropy_sum(rec, rec.entropy_s2s, "entropy_s2s");
            const double hl = detail::entropy_sum(rec, rec.entropy_lm, "entropy_lm");
            if (hs <= 0.0 || hl <= 0.0)
                throw ValidationError("record '" + rec.id +
                                      "': h_ratio_log needs strictly positive entropy sums");
            value = -std::log(hl / hs);
            break;
        }
        case VariantId::h_product:
            value = -detail::entropy_sum(rec, rec.entropy_s2s, "entropy_s2s") *
                    detail::entropy_sum(rec, rec.entropy_lm, "entropy_lm");
            break;
        case VariantId::delta_len: {
            if (rec.size() == 0) throw ValidationError("record '" + rec.id + "' has no tokens");
            double acc = 0.0;
            for (std::size_t i = 0; i < rec.size(); ++i)
                acc += std::exp(rec.logp_lm[i]) - std::exp(rec.logp_s2s[i]);
            value = acc / static_cast<double>(rec.size());
            break;
        }
    }
    if (!std::isfinite(value))
        throw ValidationError("record '" + rec.id + "': " + std::string(to_string(variant)) +
                              " is not finite");
    return value;
}

/// Scores every record in input order. Failures are rethrown with the record id.
inline ScoreTable score_batch(std::span<const LikelihoodRecord> records, VariantId variant,
                              const HarimConfig& cfg = {}, std::string metric_name = {}) {
    validate(cfg);
    ScoreTable table(metric_name.empty() ? std::string(to_string(variant)) : std::move(metric_name));
    for (const auto& rec : records) {
        double v = 0.0;
        try {
            v = score_variant(rec, variant, cfg);
        } catch (const ValidationError& e) {
            const std::string msg = e.what();
            if (msg.find("'" + rec.id + "'") != std::string::npos) throw;
            throw ValidationError("record '" + rec.id + "': " + msg);
        }
        table.insert(rec.id, v);
    }
    return table;
}

}  // namespace harim
