#pragma once

// Meta-evaluation of metrics against human judgments: segment- and
// system-level correlation, metric-to-metric correlation matrices and the
// paired input-permutation significance test.

#include <harim/correlation.hpp>
#include <harim/detail/text.hpp>
#include <harim/error.hpp>
#include <harim/likelihood_store.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace harim {

enum class Level { segment, system };

inline std::string_view to_string(Level l) { return l == Level::segment ? "segment" : "system"; }

inline std::optional<Level> parse_level(std::string_view name) {
    if (name == "segment") return Level::segment;
    if (name == "system") return Level::system;
    return std::nullopt;
}

/// Restricts evaluation to pairs whose `kind` or `system` equals a value.
/// An empty filter keeps every pair.
class SplitFilter {
public:
    SplitFilter() = default;

    /// Parses "", "all", "kind=<kind>" or "system=<label>".
    static SplitFilter parse(std::string_view spec) {
        SplitFilter f;
        spec = detail::trim(spec);
        if (spec.empty() || spec == "all") return f;
        const auto eq = spec.find('=');
        if (eq == std::string_view::npos)
            throw ValidationError("split filter must look like key=value, got '" + std::string(spec) + "'");
        const auto key = detail::trim(spec.substr(0, eq));
        const auto value = std::string(detail::trim(spec.substr(eq + 1)));
        if (key == "kind") {
            auto k = parse_kind(value);
            if (!k) throw ValidationError("unknown kind '" + value + "' in split filter");
            f.kind_ = *k;
        } else if (key == "system") {
            if (value.empty()) throw ValidationError("empty system label in split filter");
            f.system_ = value;
        } else {
            throw ValidationError("unknown split key '" + std::string(key) + "' (expected kind or system)");
        }
        return f;
    }

    static SplitFilter by_kind(SummaryKind k) {
        SplitFilter f;
        f.kind_ = k;
        return f;
    }

    bool matches(const AnnotatedPair& p) const {
        if (kind_ && p.kind != *kind_) return false;
        if (system_ && p.system != *system_) return false;
        return true;
    }

    std::string describe() const {
        if (kind_) return "kind=" + std::string(to_string(*kind_));
        if (system_) return "system=" + *system_;
        return "all";
    }

private:
    std::optional<SummaryKind> kind_;
    std::optional<std::string> system_;
};

struct CorrelationReport {
    std::string metric_name;
    Criterion criterion = Criterion::factuality;
    Level level = Level::segment;
    std::string split = "all";
    Coefficient coefficient = Coefficient::kendall_tau;
    double value = 0.0;
    std::size_t n = 0;
};

/// Every score id must name an annotated pair. Silent dropping would change
/// the evaluated population without notice.
inline void check_join(const ScoreTable& scores, std::span<const AnnotatedPair> pairs) {
    std::unordered_set<std::string> known;
    known.reserve(pairs.size());
    for (const auto& p : pairs) known.insert(p.id);
    std::vector<std::string> missing;
    for (const auto& id : scores.ids())
        if (!known.count(id)) missing.push_back(id);
    if (missing.empty()) return;
    std::string msg = "score table '" + scores.metric_name() + "' has " +
                      std::to_string(missing.size()) + " id(s) absent from the annotations:";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
    if (missing.size() > 10) msg += " ...";
    throw ValidationError(msg);
}

namespace detail {

struct AlignedSample {
    std::vector<double> metric;
    std::vector<double> human;
    std::vector<std::string> system;
};

/// Metric and judgment vectors over the pairs passing `split`, ordered by
/// pair id so every downstream statistic is independent of file order.
inline AlignedSample align(const ScoreTable& scores, std::span<const AnnotatedPair> pairs,
                           Criterion criterion, const SplitFilter& split) {
    check_join(scores, pairs);
    std::vector<const AnnotatedPair*> ordered;
    ordered.reserve(pairs.size());
    for (const auto& p : pairs)
        if (split.matches(p)) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(),
              [](const AnnotatedPair* a, const AnnotatedPair* b) { return a->id < b->id; });

    AlignedSample out;
    std::vector<std::string> missing;
    for (const auto* pp : ordered) {
        const auto& p = *pp;
        const auto judged = p.judgment(criterion);
        if (!judged)
            throw ValidationError("pair '" + p.id + "' has no '" + std::string(to_string(criterion)) +
                                  "' judgment");
        const auto score = scores.find(p.id);
        if (!score) {
            missing.push_back(p.id);
            continue;
        }
        out.metric.push_back(*score);
        out.human.push_back(*judged);
        out.system.push_back(p.system);
    }
    if (!missing.empty()) {
        std::string msg = "score table '" + scores.metric_name() + "' lacks " +
                          std::to_string(missing.size()) + " evaluated id(s):";
        for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
        if (missing.size() > 10) msg += " ...";
        throw ValidationError(msg);
    }
    if (out.metric.empty())
        throw ValidationError("no pairs left after applying split '" + split.describe() + "'");
    return out;
}

}  // namespace detail

inline CorrelationReport segment_correlation(const ScoreTable& scores, std::span<const AnnotatedPair> pairs,
                                             Criterion criterion, Coefficient coefficient,
                                             const SplitFilter& split = {}) {
    const auto sample = detail::align(scores, pairs, criterion, split);
    return {scores.metric_name(), criterion,           Level::segment,
            split.describe(),     coefficient,         correlate(coefficient, sample.metric, sample.human),
            sample.metric.size()};
}

/// Per-system (metric mean, judgment mean), ordered by system label.
struct SystemMeans {
    std::vector<std::string> systems;
    std::vector<double> metric;
    std::vector<double> human;
};

inline SystemMeans system_means(const ScoreTable& scores, std::span<const AnnotatedPair> pairs,
                                Criterion criterion, const SplitFilter& split = {}) {
    const auto sample = detail::align(scores, pairs, criterion, split);
    struct Acc {
        double metric = 0.0, human = 0.0;
        std::size_t n = 0;
    };
    std::map<std::string, Acc> groups;
    for (std::size_t i = 0; i < sample.metric.size(); ++i) {
        auto& g = groups[sample.system[i]];
        g.metric += sample.metric[i];
        g.human += sample.human[i];
        ++g.n;
    }
    SystemMeans out;
    for (const auto& [name, g] : groups) {
        out.systems.push_back(name);
        out.metric.push_back(g.metric / static_cast<double>(g.n));
        out.human.push_back(g.human / static_cast<double>(g.n));
    }
    return out;
}

inline CorrelationReport system_correlation(const ScoreTable& scores, std::span<const AnnotatedPair> pairs,
                                            Criterion criterion, Coefficient coefficient,
                                            const SplitFilter& split = {}) {
    const auto means = system_means(scores, pairs, criterion, split);
    if (means.systems.size() < 2)
        throw DegenerateError("system-level correlation needs at least 2 systems, found " +
                              std::to_string(means.systems.size()));
    return {scores.metric_name(), criterion,   Level::system,
            split.describe(),     coefficient, correlate(coefficient, means.metric, means.human),
            means.systems.size()};
}

inline CorrelationReport correlation_report(const ScoreTable& scores, std::span<const AnnotatedPair> pairs,
                                            Criterion criterion, Coefficient coefficient, Level level,
                                            const SplitFilter& split = {}) {
    return level == Level::segment ? segment_correlation(scores, pairs, criterion, coefficient, split)
                                   : system_correlation(scores, pairs, criterion, coefficient, split);
}

inline void write_report_header(std::ostream& out) {
    out << "metric\tcriterion\tlevel\tsplit\tcoefficient\tvalue\tn\n";
}

inline void write_report_row(std::ostream& out, const CorrelationReport& r) {
    out << r.metric_name << '\t' << to_string(r.criterion) << '\t' << to_string(r.level) << '\t'
        << r.split << '\t' << to_string(r.coefficient) << '\t' << detail::format_fixed(r.value) << '\t'
        << r.n << '\n';
}

// ---------------------------------------------------------------------------
// Metric-metric correlation
// ---------------------------------------------------------------------------

struct MetricMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<double>> values;
    std::size_t shared_ids = 0;
};

/// Correlation between every pair of metrics over the ids all tables share.
inline MetricMatrix metric_metric_matrix(std::span<const ScoreTable> tables, Coefficient coefficient) {
    if (tables.empty()) throw ValidationError("metric matrix needs at least one score table");
    std::vector<std::string> shared;
    for (const auto& id : tables.front().ids()) {
        bool everywhere = true;
        for (const auto& t : tables.subspan(1)) everywhere = everywhere && t.contains(id);
        if (everywhere) shared.push_back(id);
    }
    if (shared.empty()) throw ValidationError("score tables share no ids");

    const std::size_t k = tables.size();
    std::vector<std::vector<double>> columns(k);
    for (std::size_t m = 0; m < k; ++m) {
        columns[m].reserve(shared.size());
        for (const auto& id : shared) columns[m].push_back(*tables[m].find(id));
    }

    MetricMatrix out;
    out.shared_ids = shared.size();
    out.values.assign(k, std::vector<double>(k, 1.0));
    for (const auto& t : tables) out.names.push_back(t.metric_name());
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            out.values[i][j] = out.values[j][i] = correlate(coefficient, columns[i], columns[j]);
    return out;
}

inline void write_matrix(std::ostream& out, const MetricMatrix& m) {
    out << "metric";
    for (const auto& n : m.names) out << '\t' << n;
    out << '\n';
    for (std::size_t i = 0; i < m.names.size(); ++i) {
        out << m.names[i];
        for (double v : m.values[i]) out << '\t' << detail::format_fixed(v);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Paired permutation test (input swapping)
// ---------------------------------------------------------------------------

struct PermTestConfig {
    Criterion criterion = Criterion::factuality;
    Coefficient coefficient = Coefficient::kendall_tau;
    std::size_t n_permutations = 1000;
    std::uint64_t seed = 0;
    SplitFilter split{};
};

struct PermTestResult {
    std::string metric_a;
    std::string metric_b;
    Criterion criterion = Criterion::factuality;
    Coefficient coefficient = Coefficient::kendall_tau;
    double observed_gap = 0.0;
    double p_value = 1.0;
    std::size_t n_permutations = 0;
    std::uint64_t seed = 0;
    std::size_t n = 0;              ///< evaluated pairs
    std::size_t n_extreme = 0;      ///< rounds with |gap| >= |observed gap|
    std::size_t n_rejected = 0;     ///< rounds resampled because a correlation was undefined

    friend bool operator==(const PermTestResult&, const PermTestResult&) = default;
};

namespace detail {

/// Seed of permutation round `round`; rounds are independent of each other
/// so they can be evaluated in any order.
inline std::uint64_t round_seed(std::uint64_t seed, std::uint64_t round) {
    std::uint64_t z = seed + (round + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Swap pattern of one round: bit i set means example i exchanges its scores.
inline std::vector<bool> swap_pattern(std::uint64_t seed, std::uint64_t round, std::size_t n) {
    std::mt19937_64 gen(round_seed(seed, round));
    std::vector<bool> out(n);
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) bits = gen();
        out[i] = (bits >> (i % 64)) & 1U;
    }
    return out;
}

}  // namespace detail

/// Two-sided paired permutation test on already aligned vectors. Each round
/// swaps the two metric scores of every example with probability 1/2 and
/// recomputes the correlation gap; p = (extreme + 1) / (rounds + 1).
inline PermTestResult perm_input_test(std::span<const double> a, std::span<const double> b,
                                      std::span<const double> human, Coefficient coefficient,
                                      std::size_t n_permutations, std::uint64_t seed) {
    if (n_permutations < 1) throw ValidationError("number of permutations must be >= 1");
    if (a.size() != human.size() || b.size() != human.size())
        throw ValidationError("permutation test inputs differ in length");

    PermTestResult r;
    r.coefficient = coefficient;
    r.n_permutations = n_permutations;
    r.seed = seed;
    r.n = human.size();
    r.observed_gap = correlate(coefficient, a, human) - correlate(coefficient, b, human);
    const double threshold = std::fabs(r.observed_gap);

    const std::size_t max_attempts = 10 * n_permutations;
    std::vector<double> pa(a.size()), pb(b.size());
    std::size_t accepted = 0;
    std::size_t attempt = 0;
    for (; attempt < max_attempts && accepted < n_permutations; ++attempt) {
        const auto swaps = detail::swap_pattern(seed, attempt, human.size());
        for (std::size_t i = 0; i < human.size(); ++i) {
            pa[i] = swaps[i] ? b[i] : a[i];
            pb[i] = swaps[i] ? a[i] : b[i];
        }
        double gap = 0.0;
        try {
            gap = correlate(coefficient, pa, human) - correlate(coefficient, pb, human);
        } catch (const DegenerateError&) {
            ++r.n_rejected;
            continue;
        }
        ++accepted;
        if (std::fabs(gap) >= threshold) ++r.n_extreme;
    }
    if (accepted < n_permutations)
        throw DegenerateError("permutation test: only " + std::to_string(accepted) + " of " +
                              std::to_string(n_permutations) + " rounds had defined correlations after " +
                              std::to_string(attempt) + " attempts");
    r.p_value = static_cast<double>(r.n_extreme + 1) / static_cast<double>(n_permutations + 1);
    return r;
}

inline PermTestResult perm_input_test(const ScoreTable& scores_a, const ScoreTable& scores_b,
                                      std::span<const AnnotatedPair> pairs, const PermTestConfig& cfg) {
    const auto sa = detail::align(scores_a, pairs, cfg.criterion, cfg.split);
    const auto sb = detail::align(scores_b, pairs, cfg.criterion, cfg.split);
    auto r = perm_input_test(sa.metric, sb.metric, sa.human, cfg.coefficient, cfg.n_permutations, cfg.seed);
    r.metric_a = scores_a.metric_name();
    r.metric_b = scores_b.metric_name();
    r.criterion = cfg.criterion;
    return r;
}

inline void write_perm_header(std::ostream& out) {
    out << "metric_a\tmetric_b\tcriterion\tcoefficient\tobserved_gap\tp_value\tn_permutations\tseed\tn\n";
}

inline void write_perm_row(std::ostream& out, const PermTestResult& r) {
    out << r.metric_a << '\t' << r.metric_b << '\t' << to_string(r.criterion) << '\t'
        << to_string(r.coefficient) << '\t' << detail::format_fixed(r.observed_gap) << '\t'
        << detail::format_fixed(r.p_value) << '\t' << r.n_permutations << '\t' << r.seed << '\t' << r.n
        << '\n';
}

/// All pairwise tests over k metrics plus the k x k grid where 1 marks a
/// significant difference (p <= alpha). The grid is symmetric with a zero diagonal.
struct SignificanceGrid {
    std::vector<std::string> names;
    std::vector<PermTestResult> results;
    std::vector<std::vector<int>> significant;
    double alpha = 0.05;
};

inline SignificanceGrid significance_grid(std::span<const ScoreTable> tables,
                                          std::span<const AnnotatedPair> pairs, const PermTestConfig& cfg,
                                          double alpha = 0.05) {
    if (tables.size() < 2) throw ValidationError("significance grid needs at least 2 score tables");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    SignificanceGrid g;
    g.alpha = alpha;
    const std::size_t k = tables.size();
    g.significant.assign(k, std::vector<int>(k, 0));
    for (const auto& t : tables) g.names.push_back(t.metric_name());
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            auto r = perm_input_test(tables[i], tables[j], pairs, cfg);
            g.significant[i][j] = g.significant[j][i] = r.p_value <= alpha ? 1 : 0;
            g.results.push_back(std::move(r));
        }
    return g;
}

inline void write_grid(std::ostream& out, const SignificanceGrid& g) {
    out << "metric";
    for (const auto& n : g.names) out << '\t' << n;
    out << '\n';
    for (std::size_t i = 0; i < g.names.size(); ++i) {
        out << g.names[i];
        for (int v : g.significant[i]) out << '\t' << v;
        out << '\n';
    }
}

}  // namespace harim
