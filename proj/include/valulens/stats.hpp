// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 ValuLens Contributors
//
// Exact 2x2 statistics for rival-vs-validation comparisons.
//
//                 recognized   not recognized
//   rival set         a              b
//   validation        c              d

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "valulens/corpus.hpp"
#include "valulens/error.hpp"

namespace valulens {

struct ContingencyTable {
    std::int64_t a = 0;
    std::int64_t b = 0;
    std::int64_t c = 0;
    std::int64_t d = 0;

    std::int64_t rival_total() const { return a + b; }
    std::int64_t validation_total() const { return c + d; }
    std::int64_t recognized_total() const { return a + c; }
    std::int64_t total() const { return a + b + c + d; }

    double rival_rate() const { return a + b > 0 ? double(a) / double(a + b) : 0.0; }
    double val_rate() const { return c + d > 0 ? double(c) / double(c + d) : 0.0; }

    static ContingencyTable from_counts(const RecognitionCounts& rival,
                                        const RecognitionCounts& validation) {
        return {rival.recognized, rival.total - rival.recognized, validation.recognized,
                validation.total - validation.recognized};
    }

    bool operator==(const ContingencyTable&) const = default;
};

/// Relative tolerance used when deciding whether a table is "at most as
/// probable" as the observed one.
inline constexpr double kFisherTieTolerance = 1e-7;

namespace detail {

inline void check_cells(const ContingencyTable& t) {
    if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0) {
        throw DomainError("contingency table cells must be nonnegative");
    }
}

inline double log_choose(std::int64_t n, std::int64_t k) {
    return std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
           std::lgamma(double(n - k) + 1.0);
}

/// Unnormalized hypergeometric weights over the support of `a`, scaled so the
/// mode has weight 1. Built by the term-ratio recurrence outward from the
/// mode; every factor is <= 1 so nothing overflows and tails underflow to 0.
struct HypergeometricWeights {
    std::int64_t lo = 0;
    std::vector<double> w;
};

inline HypergeometricWeights hypergeometric_weights(std::int64_t n1, std::int64_t n2,
                                                    std::int64_t m1) {
    const std::int64_t lo = std::max<std::int64_t>(0, m1 - n2);
    const std::int64_t hi = std::min(n1, m1);
    const std::int64_t n = n1 + n2;
    std::int64_t mode = ((n1 + 1) * (m1 + 1)) / (n + 2);
    mode = std::clamp(mode, lo, hi);

    HypergeometricWeights out{lo, std::vector<double>(static_cast<std::size_t>(hi - lo + 1), 0.0)};
    auto at = [&](std::int64_t x) -> double& { return out.w[static_cast<std::size_t>(x - lo)]; };
    at(mode) = 1.0;
    for (std::int64_t x = mode; x < hi; ++x) {
        const double num = double(n1 - x) * double(m1 - x);
        const double den = double(x + 1) * double(n2 - m1 + x + 1);
        at(x + 1) = at(x) * (num / den);
    }
    for (std::int64_t x = mode; x > lo; --x) {
        const double num = double(x) * double(n2 - m1 + x);
        const double den = double(n1 - x + 1) * double(m1 - x + 1);
        at(x - 1) = at(x) * (num / den);
    }
    return out;
}

}  // namespace detail

/// Probability of `table` under the hypergeometric distribution fixed by its
/// margins, evaluated through log-gamma. A table whose margins admit only
/// itself has probability exactly 1.
inline double hypergeom_prob(const ContingencyTable& table) {
    detail::check_cells(table);
    const auto n1 = table.rival_total();
    const auto n2 = table.validation_total();
    const auto m1 = table.recognized_total();
    const auto lo = std::max<std::int64_t>(0, m1 - n2);
    const auto hi = std::min(n1, m1);
    if (lo == hi) return 1.0;
    const double log_p = detail::log_choose(n1, table.a) + detail::log_choose(n2, table.c) -
                         detail::log_choose(n1 + n2, m1);
    return std::clamp(std::exp(log_p), 0.0, 1.0);
}

/// Two-sided Fisher exact test: total probability of every table with the
/// observed margins that is no more probable than the observed table
/// (within kFisherTieTolerance, relative).
inline double fisher_two_sided(const ContingencyTable& table) {
    detail::check_cells(table);
    const auto n1 = table.rival_total();
    const auto n2 = table.validation_total();
    const auto m1 = table.recognized_total();
    const auto weights = detail::hypergeometric_weights(n1, n2, m1);
    if (weights.w.size() <= 1) return 1.0;

    const double observed = weights.w[static_cast<std::size_t>(table.a - weights.lo)];
    const double threshold = observed * (1.0 + kFisherTieTolerance);
    double total = 0.0;
    double tail = 0.0;
    for (double w : weights.w) {
        total += w;
        if (w <= threshold) tail += w;
    }
    return std::min(1.0, tail / total);
}

enum class SimilarityBucket { ExtremelyLow, Low, Unclear, High, ExtremelyHigh, EasierToDetect };

inline std::string_view to_string(SimilarityBucket bucket) {
    switch (bucket) {
        case SimilarityBucket::ExtremelyLow: return "Extremely low";
        case SimilarityBucket::Low: return "Low";
        case SimilarityBucket::Unclear: return "Unclear";
        case SimilarityBucket::High: return "High";
        case SimilarityBucket::ExtremelyHigh: return "Extremely high";
        case SimilarityBucket::EasierToDetect: return "Easier to detect";
    }
    return "Unclear";
}

/// Case-insensitive match against the display labels above.
inline std::optional<SimilarityBucket> parse_similarity_bucket(std::string_view label) {
    auto lower = [](std::string_view s) {
        std::string out(s);
        std::transform(out.begin(), out.end(), out.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        return out;
    };
    const auto wanted = lower(label);
    for (auto b : {SimilarityBucket::ExtremelyLow, SimilarityBucket::Low, SimilarityBucket::Unclear,
                   SimilarityBucket::High, SimilarityBucket::ExtremelyHigh,
                   SimilarityBucket::EasierToDetect}) {
        if (lower(to_string(b)) == wanted) return b;
    }
    return std::nullopt;
}

namespace thresholds {
inline constexpr double kExtremelyLow = 1e-4;
inline constexpr double kSignificant = 0.01;
inline constexpr double kSimilar = 0.1;
inline constexpr double kExtremelyHigh = 0.5;
}  // namespace thresholds

/// Six-way classification of a p-value. EasierToDetect wins over the low
/// buckets whenever the rival rate is the higher one. High is closed at .1.
inline SimilarityBucket similarity_bucket(double p, double rival_rate, double val_rate) {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(p)) throw DomainError("p-value outside [0,1]");
    if (!in_unit(rival_rate) || !in_unit(val_rate)) throw DomainError("rate outside [0,1]");

    using namespace thresholds;
    if (p <= kSignificant && rival_rate > val_rate) return SimilarityBucket::EasierToDetect;
    if (p <= kExtremelyLow) return SimilarityBucket::ExtremelyLow;
    if (p < kSignificant) return SimilarityBucket::Low;
    if (p < kSimilar) return SimilarityBucket::Unclear;
    if (p < kExtremelyHigh) return SimilarityBucket::High;
    return SimilarityBucket::ExtremelyHigh;
}

enum class Decision { Recognizes, DoesNotRecognize, Indeterminate, EasierToDetect };

inline std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::Recognizes: return "Recognizes";
        case Decision::DoesNotRecognize: return "DoesNotRecognize";
        case Decision::Indeterminate: return "Indeterminate";
        case Decision::EasierToDetect: return "EasierToDetect";
    }
    return "Indeterminate";
}

inline std::optional<Decision> parse_decision(std::string_view name) {
    for (auto d : {Decision::Recognizes, Decision::DoesNotRecognize, Decision::Indeterminate,
                   Decision::EasierToDetect}) {
        if (to_string(d) == name) return d;
    }
    return std::nullopt;
}

/// +1 for the recognizing side, -1 for not recognizing, 0 for Indeterminate.
inline int decision_side(Decision d) {
    switch (d) {
        case Decision::Recognizes:
        case Decision::EasierToDetect: return 1;
        case Decision::DoesNotRecognize: return -1;
        case Decision::Indeterminate: return 0;
    }
    return 0;
}

struct Assessment {
    double p_value = 1.0;
    SimilarityBucket bucket = SimilarityBucket::ExtremelyHigh;
    Decision decision = Decision::Indeterminate;
    double rival_rate = 0.0;
    double val_rate = 0.0;
    bool needs_more_images = false;

    bool operator==(const Assessment&) const = default;
};

inline Assessment assess(const RecognitionCounts& rival, const RecognitionCounts& validation) {
    if (rival.total <= 0 || validation.total <= 0) {
        throw DomainError("assess needs nonzero rival and validation totals");
    }
    if (rival.recognized < 0 || rival.recognized > rival.total || validation.recognized < 0 ||
        validation.recognized > validation.total) {
        throw DomainError("recognized count outside [0, total]");
    }
    const auto table = ContingencyTable::from_counts(rival, validation);
    Assessment out;
    out.p_value = fisher_two_sided(table);
    out.rival_rate = table.rival_rate();
    out.val_rate = table.val_rate();
    out.bucket = similarity_bucket(out.p_value, out.rival_rate, out.val_rate);

    using namespace thresholds;
    if (out.bucket == SimilarityBucket::EasierToDetect) {
        out.decision = Decision::EasierToDetect;
    } else if (out.p_value < kSignificant && out.rival_rate < out.val_rate) {
        out.decision = Decision::DoesNotRecognize;
    } else if (out.p_value > kSimilar) {
        out.decision = Decision::Recognizes;
    } else {
        out.decision = Decision::Indeterminate;
    }
    out.needs_more_images = out.decision == Decision::Indeterminate;
    return out;
}

inline constexpr int kAugmentationStep = 5;

struct Augmentation {
    bool needed = false;
    int additional_images = 0;
};

/// Ambiguous outcomes are re-run after adding a fixed batch of rival images.
inline Augmentation needs_augmentation(const Assessment& assessment) {
    if (assessment.decision == Decision::Indeterminate) return {true, kAugmentationStep};
    return {false, 0};
}

}  // namespace valulens
