#pragma once

// Kendall tau-b, Spearman (mid-rank) and Pearson correlation. All three throw
// DegenerateError instead of returning NaN when a side is constant.

#include <harim/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace harim {

enum class Coefficient { kendall_tau, spearman_r, pearson_rho };

inline constexpr Coefficient kAllCoefficients[] = {Coefficient::kendall_tau, Coefficient::spearman_r,
                                                   Coefficient::pearson_rho};

inline std::string_view to_string(Coefficient c) {
    switch (c) {
        case Coefficient::kendall_tau: return "kendall_tau";
        case Coefficient::spearman_r: return "spearman_r";
        case Coefficient::pearson_rho: return "pearson_rho";
    }
    return "?";
}

/// Accepts both the canonical names and the short forms kendall/spearman/pearson.
inline std::optional<Coefficient> parse_coefficient(std::string_view name) {
    if (name == "kendall" || name == "kendall_tau" || name == "tau") return Coefficient::kendall_tau;
    if (name == "spearman" || name == "spearman_r") return Coefficient::spearman_r;
    if (name == "pearson" || name == "pearson_rho") return Coefficient::pearson_rho;
    return std::nullopt;
}

namespace detail {

inline void check_pairable(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw ValidationError("correlation inputs differ in length (" + std::to_string(x.size()) +
                              " vs " + std::to_string(y.size()) + ")");
    if (x.size() < 2) throw DegenerateError("correlation needs at least 2 samples");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw ValidationError("correlation input contains a non-finite value");
}

inline bool is_constant(std::span<const double> v) {
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>{}) == v.end();
}

inline std::int64_t pairs_in_run(std::int64_t t) { return t * (t - 1) / 2; }

/// Sorts `idx` by y[idx] with a stable merge sort and returns the number of
/// inversions (pairs moved past a strictly smaller element).
inline std::int64_t merge_sort_count(std::vector<std::size_t>& idx, std::span<const double> y) {
    const std::size_t n = idx.size();
    std::vector<std::size_t> buf(n);
    std::int64_t swaps = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo < n; lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, n);
            const std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (y[idx[j]] < y[idx[i]]) {
                    swaps += static_cast<std::int64_t>(mid - i);
                    buf[k++] = idx[j++];
                } else {
                    buf[k++] = idx[i++];
                }
            }
            while (i < mid) buf[k++] = idx[i++];
            while (j < hi) buf[k++] = idx[j++];
        }
        idx.swap(buf);
    }
    return swaps;
}

}  // namespace detail

/// Tie-corrected Kendall tau-b, O(n log n) (Knight's algorithm):
///   (C - D) / sqrt((n0 - n1) (n0 - n2))
/// with n0 = n(n-1)/2 and n1, n2 the pairs tied in x and in y respectively.
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
    detail::check_pairable(x, y);
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    std::int64_t ties_x = 0, ties_xy = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && x[idx[j]] == x[idx[i]]) ++j;
        ties_x += detail::pairs_in_run(static_cast<std::int64_t>(j - i));
        for (std::size_t a = i; a < j;) {
            std::size_t b = a;
            while (b < j && y[idx[b]] == y[idx[a]]) ++b;
            ties_xy += detail::pairs_in_run(static_cast<std::int64_t>(b - a));
            a = b;
        }
        i = j;
    }

    const std::int64_t discordant = detail::merge_sort_count(idx, y);

    std::int64_t ties_y = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && y[idx[j]] == y[idx[i]]) ++j;
        ties_y += detail::pairs_in_run(static_cast<std::int64_t>(j - i));
        i = j;
    }

    const std::int64_t total = detail::pairs_in_run(static_cast<std::int64_t>(n));
    const std::int64_t untied_x = total - ties_x;
    const std::int64_t untied_y = total - ties_y;
    if (untied_x == 0 || untied_y == 0)
        throw DegenerateError("Kendall tau undefined: one input is constant");
    const std::int64_t c_minus_d = total - ties_x - ties_y + ties_xy - 2 * discordant;
    return static_cast<double>(c_minus_d) /
           std::sqrt(static_cast<double>(untied_x) * static_cast<double>(untied_y));
}

/// 1-based ranks; tied values share the average of the positions they span.
inline std::vector<double> mid_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && v[idx[j]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
        for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = r;
        i = j;
    }
    return ranks;
}

inline double pearson_rho(std::span<const double> x, std::span<const double> y) {
    detail::check_pairable(x, y);
    if (detail::is_constant(x) || detail::is_constant(y))
        throw DegenerateError("correlation undefined: one input is constant");
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DegenerateError("correlation undefined: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double spearman_r(std::span<const double> x, std::span<const double> y) {
    detail::check_pairable(x, y);
    const auto rx = mid_ranks(x);
    const auto ry = mid_ranks(y);
    return pearson_rho(rx, ry);
}

inline double correlate(Coefficient c, std::span<const double> x, std::span<const double> y) {
    switch (c) {
        case Coefficient::kendall_tau: return kendall_tau(x, y);
        case Coefficient::spearman_r: return spearman_r(x, y);
        case Coefficient::pearson_rho: return pearson_rho(x, y);
    }
    return 0.0;
}

}  // namespace harim
