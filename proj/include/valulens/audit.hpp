// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 ValuLens Contributors
//
// Audit analyses over a corpus and a prediction log: per-criterion
// assessments and the enacted value they imply, validation baselines,
// cross-model comparisons and the exception-fraction regression.

#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "valulens/corpus.hpp"
#include "valulens/error.hpp"
#include "valulens/stats.hpp"

namespace valulens {

inline constexpr std::string_view kEnactedUnclear = "unclear";
inline constexpr std::string_view kEnactedBaselineFree = "baseline-free";

struct CriterionResult {
    std::string criterion_id;
    std::string model_id;
    int k_eval = 5;
    RecognitionCounts rival_counts;
    std::optional<RecognitionCounts> val_counts;  // empty for baseline-free criteria
    std::optional<Assessment> assessment;         // present iff val_counts is
    std::string enacted_value;

    bool is_baseline_free() const { return !assessment.has_value(); }
    bool operator==(const CriterionResult&) const = default;
};

inline std::string enacted_value_for(Decision decision, const ValueMapping& mapping) {
    switch (decision) {
        case Decision::Recognizes:
        case Decision::EasierToDetect: return mapping.value_if_recognized;
        case Decision::DoesNotRecognize: return mapping.value_if_unrecognized;
        case Decision::Indeterminate: return std::string(kEnactedUnclear);
    }
    return std::string(kEnactedUnclear);
}

/// Rival and validation images are both judged with the criterion's
/// recognition rule, so the two rates are directly comparable.
inline CriterionResult evaluate_criterion(const Corpus& corpus, const PredictionLog& log,
                                          std::string_view model_id,
                                          std::string_view criterion_id, int k_eval) {
    const auto& criterion = corpus.criterion(criterion_id);
    const CategorySpec* owner =
        criterion.is_baseline_free() ? nullptr : &corpus.category(*criterion.category_id);

    std::vector<std::string> missing;
    auto note_missing = [&](std::span<const std::string> ids) {
        for (const auto& id : ids) {
            if (!log.find(model_id, id)) missing.push_back(id);
        }
    };
    note_missing(criterion.rival_image_ids);
    if (owner) note_missing(owner->validation_image_ids);
    if (!missing.empty()) {
        throw CoverageError("model '" + std::string(model_id) + "' lacks records for criterion '" +
                                criterion.criterion_id + "'",
                            std::move(missing));
    }

    CriterionResult result;
    result.criterion_id = criterion.criterion_id;
    result.model_id = std::string(model_id);
    result.k_eval = k_eval;
    result.rival_counts =
        counts_for(log, model_id, criterion.rival_image_ids, criterion.recognition_rule, k_eval);
    if (!owner) {
        result.enacted_value = std::string(kEnactedBaselineFree);
        return result;
    }
    result.val_counts =
        counts_for(log, model_id, owner->validation_image_ids, criterion.recognition_rule, k_eval);
    result.assessment = assess(result.rival_counts, *result.val_counts);
    result.enacted_value = enacted_value_for(result.assessment->decision, criterion.value_mapping);
    return result;
}

/// Every criterion under every model, criteria in manifest order within each
/// model. Models are evaluated concurrently; the output order is fixed.
inline std::vector<CriterionResult> evaluate_all(const Corpus& corpus, const PredictionLog& log,
                                                 std::span<const std::string> model_ids,
                                                 int k_eval) {
    std::vector<std::future<std::vector<CriterionResult>>> jobs;
    jobs.reserve(model_ids.size());
    for (const auto& model : model_ids) {
        jobs.push_back(std::async(std::launch::async, [&corpus, &log, model, k_eval] {
            std::vector<CriterionResult> out;
            out.reserve(corpus.criteria().size());
            for (const auto& c : corpus.criteria()) {
                out.push_back(evaluate_criterion(corpus, log, model, c.criterion_id, k_eval));
            }
            return out;
        }));
    }
    std::vector<CriterionResult> all;
    for (auto& job : jobs) {
        auto part = job.get();
        std::move(part.begin(), part.end(), std::back_inserter(all));
    }
    return all;
}

/// Top-k accuracy of `model_id` on the validation images of one category
/// (`category_id` set) or of every category, each judged against its own id.
inline double validation_accuracy(const Corpus& corpus, const PredictionLog& log,
                                  std::string_view model_id,
                                  std::optional<std::string_view> category_id, int k_eval) {
    RecognitionCounts total;
    std::vector<std::string> missing;
    auto add = [&](const CategorySpec& category) {
        try {
            auto c = counts_for(log, model_id, category.validation_image_ids,
                                MatchRule::exact(category.category_id), k_eval);
            total.recognized += c.recognized;
            total.total += c.total;
        } catch (const CoverageError& e) {
            missing.insert(missing.end(), e.details().begin(), e.details().end());
        }
    };
    if (category_id) {
        add(corpus.category(*category_id));
    } else {
        for (const auto& category : corpus.categories()) add(category);
    }
    if (!missing.empty()) {
        throw CoverageError("validation coverage gap for model '" + std::string(model_id) + "'",
                            std::move(missing));
    }
    if (total.total == 0) throw DomainError("validation scope contains no images");
    return total.rate();
}

/// Unweighted mean of per-criterion rival rates for one model; baseline-free
/// criteria are skipped.
inline double averaged_rival_accuracy(std::span<const CriterionResult> results) {
    double sum = 0.0;
    std::size_t n = 0;
    std::optional<std::string> model;
    for (const auto& r : results) {
        if (model && *model != r.model_id) {
            throw DomainError("averaged_rival_accuracy needs results from a single model");
        }
        model = r.model_id;
        if (r.is_baseline_free()) continue;
        sum += r.rival_counts.rate();
        ++n;
    }
    if (n == 0) throw DomainError("no criterion results to average");
    return sum / static_cast<double>(n);
}

struct CriterionComparison {
    std::string criterion_id;
    std::vector<Decision> decisions;  // one per model, in the given order
    std::vector<RecognitionCounts> rival_counts;
    std::vector<RecognitionCounts> val_counts;
    bool flip = false;
    bool monotonic_rival = false;
    bool monotonic_val = false;
};

struct FlipReport {
    std::vector<std::string> model_order;
    std::vector<CriterionComparison> criteria;  // sorted by criterion_id

    std::vector<std::string> flipped() const {
        std::vector<std::string> out;
        for (const auto& c : criteria) {
            if (c.flip) out.push_back(c.criterion_id);
        }
        return out;
    }
    std::size_t flip_count() const { return flipped().size(); }
    std::size_t monotonic_rival_count() const {
        return std::count_if(criteria.begin(), criteria.end(),
                             [](const auto& c) { return c.monotonic_rival; });
    }
    std::size_t monotonic_both_count() const {
        return std::count_if(criteria.begin(), criteria.end(),
                             [](const auto& c) { return c.monotonic_rival && c.monotonic_val; });
    }
};

/// Nondecreasing with at least one strict increase; rates compared exactly.
inline bool is_monotonic_increase(std::span<const RecognitionCounts> seq) {
    auto cmp = [](const RecognitionCounts& x, const RecognitionCounts& y) {
        const auto lhs = x.recognized * y.total;
        const auto rhs = y.recognized * x.total;
        return (lhs > rhs) - (lhs < rhs);
    };
    bool strict = false;
    for (std::size_t i = 1; i < seq.size(); ++i) {
        const int c = cmp(seq[i - 1], seq[i]);
        if (c > 0) return false;
        if (c < 0) strict = true;
    }
    return strict;
}

/// True when at least one decision is on the recognizing side and another on
/// the not-recognizing side. Indeterminate never flips by itself.
inline bool is_flip(std::span<const Decision> decisions) {
    bool yes = false;
    bool no = false;
    for (auto d : decisions) {
        yes = yes || decision_side(d) > 0;
        no = no || decision_side(d) < 0;
    }
    return yes && no;
}

inline FlipReport compare_models(std::span<const CriterionResult> results,
                                 std::span<const std::string> model_order) {
    if (model_order.empty()) throw DomainError("compare_models needs at least one model");
    std::map<std::string, std::size_t> model_pos;
    for (std::size_t i = 0; i < model_order.size(); ++i) {
        if (!model_pos.emplace(model_order[i], i).second) {
            throw DomainError("model listed twice: " + model_order[i]);
        }
    }

    std::map<std::string, std::vector<const CriterionResult*>> by_criterion;
    std::vector<std::string> problems;
    for (const auto& r : results) {
        if (r.is_baseline_free()) continue;
        auto pos = model_pos.find(r.model_id);
        if (pos == model_pos.end()) continue;
        auto& slots = by_criterion[r.criterion_id];
        slots.resize(model_order.size(), nullptr);
        if (slots[pos->second]) {
            problems.push_back(r.criterion_id + ": duplicate result for " + r.model_id);
        }
        slots[pos->second] = &r;
    }

    FlipReport report;
    report.model_order.assign(model_order.begin(), model_order.end());
    for (const auto& [criterion_id, slots] : by_criterion) {
        CriterionComparison c;
        c.criterion_id = criterion_id;
        for (std::size_t m = 0; m < slots.size(); ++m) {
            if (!slots[m]) {
                problems.push_back(criterion_id + ": no result for " + model_order[m]);
                continue;
            }
            c.decisions.push_back(slots[m]->assessment->decision);
            c.rival_counts.push_back(slots[m]->rival_counts);
            c.val_counts.push_back(*slots[m]->val_counts);
        }
        c.flip = is_flip(c.decisions);
        c.monotonic_rival = is_monotonic_increase(c.rival_counts);
        c.monotonic_val = is_monotonic_increase(c.val_counts);
        report.criteria.push_back(std::move(c));
    }
    if (!problems.empty()) throw CoverageError("ragged model coverage", std::move(problems));
    return report;
}

/// Criteria that flip at top-5 and still flip when decisions come from top-1
/// counts.
inline std::vector<std::string> top1_narrowing(std::span<const CriterionResult> results_top1,
                                               std::span<const CriterionResult> results_top5,
                                               std::span<const std::string> model_order) {
    const auto top1 = compare_models(results_top1, model_order);
    const auto top5 = compare_models(results_top5, model_order);
    std::set<std::string> ids1;
    std::set<std::string> ids5;
    for (const auto& c : top1.criteria) ids1.insert(c.criterion_id);
    for (const auto& c : top5.criteria) ids5.insert(c.criterion_id);
    if (ids1 != ids5) {
        std::vector<std::string> diff;
        std::set_symmetric_difference(ids1.begin(), ids1.end(), ids5.begin(), ids5.end(),
                                      std::back_inserter(diff));
        throw CoverageError("top-1 and top-5 results cover different criteria", std::move(diff));
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < top5.criteria.size(); ++i) {
        if (top5.criteria[i].flip && top1.criteria[i].flip) {
            out.push_back(top5.criteria[i].criterion_id);
        }
    }
    return out;
}

inline constexpr double kDefaultMaxExceptionFraction = 0.20;

struct DphPoint {
    std::string criterion_id;
    std::string model_id;
    double exception_fraction = 0.0;
    double rival_rate = 0.0;

    bool operator==(const DphPoint&) const = default;
};

/// One point per (criterion, model) whose exception fraction is strictly
/// below `max_fraction`, ordered by model then criterion.
inline std::vector<DphPoint> dph_points(const Corpus& corpus,
                                        std::span<const CriterionResult> results,
                                        double max_fraction = kDefaultMaxExceptionFraction) {
    std::vector<DphPoint> out;
    for (const auto& r : results) {
        const auto& criterion = corpus.criterion(r.criterion_id);
        auto fraction = corpus.exception_fraction(criterion);
        if (!fraction || r.is_baseline_free()) continue;
        if (!(*fraction < max_fraction)) continue;
        out.push_back({r.criterion_id, r.model_id, *fraction, r.rival_counts.rate()});
    }
    std::sort(out.begin(), out.end(), [](const DphPoint& x, const DphPoint& y) {
        return std::tie(x.model_id, x.criterion_id) < std::tie(y.model_id, y.criterion_id);
    });
    return out;
}

inline std::map<std::string, std::vector<DphPoint>> group_by_model(
    std::span<const DphPoint> points) {
    std::map<std::string, std::vector<DphPoint>> out;
    for (const auto& p : points) out[p.model_id].push_back(p);
    return out;
}

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct RegressionFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n = 0;

    double at(double x) const { return intercept + slope * x; }
};

/// Ordinary least squares on centered data. r^2 = 1 - SSres/SStot, clamped
/// to [0,1]; a constant response that the line fits exactly has r^2 = 1.
inline RegressionFit fit_least_squares(std::span<const Point2> points) {
    const auto n = points.size();
    if (n < 2) throw DomainError("least squares needs at least two points");
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (const auto& p : points) {
        const double dx = p.x - mx;
        const double dy = p.y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    const auto same = [&](auto field) {
        return std::all_of(points.begin(), points.end(),
                           [&](const Point2& p) { return field(p) == field(points.front()); });
    };
    if (same([](const Point2& p) { return p.x; })) {
        throw DomainError("least squares needs at least two distinct x values");
    }
    const bool flat_y = same([](const Point2& p) { return p.y; });

    RegressionFit fit;
    fit.n = n;
    fit.slope = flat_y ? 0.0 : sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& p : points) {
        const double e = p.y - fit.at(p.x);
        ss_res += e * e;
    }
    fit.r_squared = flat_y ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    return fit;
}

inline RegressionFit fit_dph(std::span<const DphPoint> points) {
    std::vector<Point2> xy;
    xy.reserve(points.size());
    for (const auto& p : points) xy.push_back({p.exception_fraction, p.rival_rate});
    return fit_least_squares(xy);
}

}  // namespace valulens
