// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 ValuLens Contributors
//
// Report generation: assessment tables, scatter data for the exception
// regression, and regeneration of a printed results table from its
// percentages.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "valulens/audit.hpp"
#include "valulens/corpus.hpp"
#include "valulens/error.hpp"
#include "valulens/stats.hpp"

namespace valulens {

// ---------------------------------------------------------------------------
// Number formatting. All report text goes through these so output is
// byte-identical across runs.

/// p-values to three significant figures ("0.00167", "0.42", "1", "2.62e-10").
inline std::string format_p(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", p);
    return buf;
}

/// Whole percent, rounded half away from zero ("27%").
inline std::string format_percent0(double rate) {
    return std::to_string(std::lround(rate * 100.0)) + "%";
}

/// Percent with one decimal ("26.7%").
inline std::string format_percent1(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", rate * 100.0);
    return buf;
}

inline std::string format_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// Count reconstruction

struct CountReconstruction {
    std::int64_t count = 0;
    /// Two counts are equally near, or more than one count displays as the
    /// printed percentage.
    bool ambiguous = false;
    /// Some count displays exactly as the printed percentage.
    bool consistent = true;
};

/// Recovers the integer count behind a percentage printed with `decimals`
/// decimal places over `denominator` items.
inline CountReconstruction reconstruct_counts(double rate_percent, std::int64_t denominator,
                                              int decimals = 0) {
    if (denominator < 1) throw DomainError("denominator must be >= 1");
    if (!(rate_percent >= 0.0 && rate_percent <= 100.0)) {
        throw DomainError("rate_percent must lie in [0,100]");
    }
    const double half_step = 0.5 * std::pow(10.0, -decimals);
    constexpr double kSlack = 1e-9;

    CountReconstruction out;
    double best = std::numeric_limits<double>::infinity();
    int ties = 0;
    int displays_as_printed = 0;
    for (std::int64_t c = 0; c <= denominator; ++c) {
        const double diff = std::abs(100.0 * double(c) / double(denominator) - rate_percent);
        if (diff < best - kSlack) {
            best = diff;
            out.count = c;
            ties = 1;
        } else if (std::abs(diff - best) <= kSlack) {
            ++ties;
        }
        if (diff <= half_step + kSlack) ++displays_as_printed;
    }
    out.consistent = displays_as_printed > 0;
    out.ambiguous = ties > 1 || displays_as_printed > 1;
    return out;
}

// ---------------------------------------------------------------------------
// Assessment table

struct ReportRow {
    ValueArea value_area = ValueArea::Other;
    std::string enacted_value;
    std::string category_label;
    std::string criterion;
    std::string rival_rate;  // "27%" or "80% (of 25)"
    std::string val_rate;    // "74%" or "N/A"
    std::string bucket;      // bucket label or "N/A"

    // Raw values for machine-readable output.
    std::string criterion_id;
    std::string model_id;
    RecognitionCounts rival_counts;
    std::optional<RecognitionCounts> val_counts;
    std::optional<double> p_value;
    std::optional<Decision> decision;
};

inline std::string rival_rate_label(const RecognitionCounts& counts) {
    auto label = format_percent0(counts.rate());
    if (counts.total != static_cast<std::int64_t>(kDefaultRivalSetSize)) {
        label += " (of " + std::to_string(counts.total) + ")";
    }
    return label;
}

/// Rows ordered by value area, then category label, then criterion.
inline std::vector<ReportRow> make_report_rows(const Corpus& corpus,
                                               std::span<const CriterionResult> results) {
    std::vector<ReportRow> rows;
    for (const auto& r : results) {
        const auto& criterion = corpus.criterion(r.criterion_id);
        ReportRow row;
        row.criterion_id = r.criterion_id;
        row.model_id = r.model_id;
        row.criterion = criterion.description;
        row.enacted_value = r.enacted_value;
        row.rival_counts = r.rival_counts;
        row.rival_rate = rival_rate_label(r.rival_counts);
        if (criterion.category_id) {
            const auto& category = corpus.category(*criterion.category_id);
            row.value_area = category.value_area;
            row.category_label = category.display_labels.empty()
                                     ? category.category_id
                                     : category.display_labels.front();
        } else {
            row.value_area = ValueArea::Other;
            row.category_label = criterion.criterion_id;
        }
        if (r.assessment) {
            row.val_counts = r.val_counts;
            row.val_rate = format_percent0(r.val_counts->rate());
            row.bucket = std::string(to_string(r.assessment->bucket));
            row.p_value = r.assessment->p_value;
            row.decision = r.assessment->decision;
        } else {
            row.val_rate = "N/A";
            row.bucket = "N/A";
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& x, const ReportRow& y) {
        return std::tie(x.value_area, x.category_label, x.criterion, x.model_id) <
               std::tie(y.value_area, y.category_label, y.criterion, y.model_id);
    });
    return rows;
}

enum class TableFormat { Delimited, AlignedText, Json };

inline std::optional<TableFormat> parse_table_format(std::string_view name) {
    if (name == "tsv" || name == "delimited") return TableFormat::Delimited;
    if (name == "text" || name == "aligned-text") return TableFormat::AlignedText;
    if (name == "json") return TableFormat::Json;
    return std::nullopt;
}

inline void emit_assessment_table(std::ostream& out, std::span<const ReportRow> rows,
                                  TableFormat format) {
    if (rows.empty()) throw DomainError("no results to report");

    if (format == TableFormat::Json) {
        for (const auto& r : rows) {
            nlohmann::ordered_json j;
            j["criterion_id"] = r.criterion_id;
            j["model_id"] = r.model_id;
            j["value_area"] = std::string(to_string(r.value_area));
            j["category"] = r.category_label;
            j["criterion"] = r.criterion;
            j["rival_recognized"] = r.rival_counts.recognized;
            j["rival_total"] = r.rival_counts.total;
            const auto val = r.val_counts;
            j["val_recognized"] = or_null(val ? std::optional(val->recognized) : std::nullopt);
            j["val_total"] = or_null(val ? std::optional(val->total) : std::nullopt);
            j["p_value"] = or_null(r.p_value);
            j["bucket"] = r.bucket;
            j["decision"] = r.decision ? nlohmann::ordered_json(std::string(to_string(*r.decision)))
                                       : nlohmann::ordered_json(nullptr);
            j["enacted_value"] = r.enacted_value;
            out << j.dump() << '\n';
        }
        return;
    }

    const std::vector<std::string> header{"value_area", "enacted_value", "category", "criterion",
                                          "model",      "% rival",       "% val",    "similarity"};
    std::vector<std::vector<std::string>> cells;
    cells.reserve(rows.size());
    for (const auto& r : rows) {
        cells.push_back({std::string(to_string(r.value_area)), r.enacted_value, r.category_label,
                         r.criterion, r.model_id, r.rival_rate, r.val_rate, r.bucket});
    }

    if (format == TableFormat::Delimited) {
        auto line = [&](const std::vector<std::string>& fields) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (i) out << '\t';
                out << fields[i];
            }
            out << '\n';
        };
        line(header);
        for (const auto& c : cells) line(c);
        return;
    }

    std::vector<std::size_t> width(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
    for (const auto& c : cells) {
        for (std::size_t i = 0; i < c.size(); ++i) width[i] = std::max(width[i], c[i].size());
    }
    auto line = [&](const std::vector<std::string>& fields) {
        std::string s;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) s += "  ";
            s += fields[i];
            if (i + 1 < fields.size()) s.append(width[i] - fields[i].size(), ' ');
        }
        out << s << '\n';
    };
    line(header);
    for (const auto& c : cells) line(c);
}

// ---------------------------------------------------------------------------
// Scatter data

/// Columns: kind (point|trend), model_id, criterion_id, x, y. Each model gets
/// its points followed by the two endpoints of its trend line over the
/// model's x range.
inline void emit_dph_scatter(std::ostream& out, std::span<const DphPoint> points,
                             const std::map<std::string, RegressionFit>& fits) {
    const auto series = group_by_model(points);
    for (const auto& [model, pts] : series) {
        auto it = fits.find(model);
        if (it == fits.end()) throw DomainError("no trend line for model '" + model + "'");
        if (it->second.n != pts.size()) {
            throw DomainError("trend line for '" + model + "' was fitted to different points");
        }
    }
    out << "kind\tmodel_id\tcriterion_id\tx\ty\n";
    for (const auto& [model, pts] : series) {
        double lo = pts.front().exception_fraction;
        double hi = lo;
        for (const auto& p : pts) {
            out << "point\t" << model << '\t' << p.criterion_id << '\t'
                << format_real(p.exception_fraction) << '\t' << format_real(p.rival_rate) << '\n';
            lo = std::min(lo, p.exception_fraction);
            hi = std::max(hi, p.exception_fraction);
        }
        const auto& fit = fits.at(model);
        for (double x : {lo, hi}) {
            out << "trend\t" << model << "\t\t" << format_real(x) << '\t' << format_real(fit.at(x))
                << '\n';
        }
    }
}

/// Fits one trend line per model and writes the scatter. A model with fewer
/// than two distinct x values raises the fitting error.
inline std::map<std::string, RegressionFit> emit_dph_scatter(std::ostream& out,
                                                             std::span<const DphPoint> points) {
    std::map<std::string, RegressionFit> fits;
    for (const auto& [model, pts] : group_by_model(points)) fits.emplace(model, fit_dph(pts));
    emit_dph_scatter(out, points, fits);
    return fits;
}

// ---------------------------------------------------------------------------
// Printed-table regeneration

/// One row of a printed results table: percentages with optional explicit
/// denominators and the similarity label printed next to them.
struct PrintedRow {
    std::string value_area;
    std::string enacted_value;
    std::string category;
    std::string criterion;
    double rival_pct = 0.0;
    std::optional<std::int64_t> rival_of;
    std::optional<double> val_pct;  // empty when printed "N/A"
    std::optional<std::int64_t> val_of;
    std::string printed_label;  // may be empty when the source lost it
};

inline constexpr std::int64_t kDefaultValidationSetSize = 50;

/// Tab-separated with a header line; columns value_area, enacted_value,
/// category, criterion, rival_pct, rival_of, val_pct, val_of, printed_label.
/// "NA" marks a missing validation rate, an empty *_of column the default size.
inline std::vector<PrintedRow> read_printed_table(std::istream& in) {
    std::vector<PrintedRow> rows;
    std::string line;
    std::size_t line_no = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string field;
        std::istringstream ss(s);
        while (std::getline(ss, field, '\t')) out.push_back(field);
        if (!s.empty() && s.back() == '\t') out.emplace_back();
        return out;
    };
    auto number = [&](const std::string& s) -> double {
        try {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ParseError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
        }
    };
    bool header = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.rfind("# ", 0) == 0) continue;
        if (header) {
            header = false;
            continue;
        }
        auto f = split(line);
        if (f.size() < 8) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 9 columns");
        }
        f.resize(9);
        PrintedRow row;
        row.value_area = f[0];
        row.enacted_value = f[1];
        row.category = f[2];
        row.criterion = f[3];
        row.rival_pct = number(f[4]);
        if (!f[5].empty()) row.rival_of = static_cast<std::int64_t>(number(f[5]));
        if (f[6] != "NA") row.val_pct = number(f[6]);
        if (!f[7].empty() && f[7] != "NA") row.val_of = static_cast<std::int64_t>(number(f[7]));
        row.printed_label = f[8];
        rows.push_back(std::move(row));
    }
    return rows;
}

enum class RowStatus { Match, Mismatch, Ambiguous, Unverifiable };

inline std::string_view to_string(RowStatus s) {
    switch (s) {
        case RowStatus::Match: return "match";
        case RowStatus::Mismatch: return "mismatch";
        case RowStatus::Ambiguous: return "ambiguous";
        case RowStatus::Unverifiable: return "unverifiable";
    }
    return "unverifiable";
}

struct RegeneratedRow {
    PrintedRow printed;
    CountReconstruction rival;
    std::optional<CountReconstruction> val;
    std::int64_t rival_total = 0;
    std::int64_t val_total = 0;
    std::optional<double> p_value;
    std::optional<SimilarityBucket> computed;
    RowStatus status = RowStatus::Unverifiable;
    std::string note;
};

struct Regeneration {
    std::vector<RegeneratedRow> rows;

    std::size_t count(RowStatus s) const {
        return std::count_if(rows.begin(), rows.end(),
                             [s](const RegeneratedRow& r) { return r.status == s; });
    }
    /// Rows whose counts reconstruct unambiguously and carry a printed label.
    std::size_t compared() const { return count(RowStatus::Match) + count(RowStatus::Mismatch); }
    double match_fraction() const {
        return compared() == 0 ? 0.0 : double(count(RowStatus::Match)) / double(compared());
    }
};

inline Regeneration regenerate_printed_table(std::span<const PrintedRow> printed) {
    Regeneration out;
    for (const auto& p : printed) {
        RegeneratedRow r;
        r.printed = p;
        r.rival_total = p.rival_of.value_or(static_cast<std::int64_t>(kDefaultRivalSetSize));
        r.val_total = p.val_of.value_or(kDefaultValidationSetSize);
        r.rival = reconstruct_counts(p.rival_pct, r.rival_total);
        std::vector<std::string> notes;
        if (!r.rival.consistent) notes.push_back("rival % not reproducible by any count");

        if (!p.val_pct) {
            r.status = RowStatus::Unverifiable;
            notes.push_back("baseline-free row (no validation rate)");
        } else {
            r.val = reconstruct_counts(*p.val_pct, r.val_total);
            if (!r.val->consistent) notes.push_back("val % not reproducible by any count");
            const RecognitionCounts rival{r.rival.count, r.rival_total};
            const RecognitionCounts val{r.val->count, r.val_total};
            const auto a = assess(rival, val);
            r.p_value = a.p_value;
            r.computed = a.bucket;
            const auto printed_bucket = parse_similarity_bucket(p.printed_label);
            if (r.rival.ambiguous || r.val->ambiguous) {
                r.status = RowStatus::Ambiguous;
                notes.push_back("count reconstruction ambiguous");
            } else if (!printed_bucket) {
                r.status = RowStatus::Unverifiable;
                notes.push_back(p.printed_label.empty() ? "printed label missing"
                                                        : "unknown printed label");
            } else {
                r.status = *printed_bucket == a.bucket ? RowStatus::Match : RowStatus::Mismatch;
            }
        }
        for (std::size_t i = 0; i < notes.size(); ++i) {
            if (i) r.note += "; ";
            r.note += notes[i];
        }
        out.rows.push_back(std::move(r));
    }
    return out;
}

/// Lists every row that is not a clean match: mismatches, ambiguous or
/// non-reproducible reconstructions and rows that cannot be checked.
inline void emit_discrepancy_report(std::ostream& out, const Regeneration& regen) {
    out << "# compared " << regen.compared() << ", matched " << regen.count(RowStatus::Match)
        << " (" << format_percent1(regen.match_fraction()) << "), mismatched "
        << regen.count(RowStatus::Mismatch) << ", ambiguous " << regen.count(RowStatus::Ambiguous)
        << ", unverifiable " << regen.count(RowStatus::Unverifiable) << '\n';
    out << "status\tcategory\tcriterion\trival\tval\tp\tcomputed\tprinted\tnote\n";
    for (const auto& r : regen.rows) {
        if (r.status == RowStatus::Match && r.note.empty()) continue;
        out << to_string(r.status) << '\t' << r.printed.category << '\t' << r.printed.criterion
            << '\t' << r.rival.count << '/' << r.rival_total << '\t';
        if (r.val) {
            out << r.val->count << '/' << r.val_total;
        } else {
            out << "N/A";
        }
        out << '\t' << (r.p_value ? format_p(*r.p_value) : "N/A") << '\t'
            << (r.computed ? std::string(to_string(*r.computed)) : "N/A") << '\t'
            << (r.printed.printed_label.empty() ? "-" : r.printed.printed_label) << '\t' << r.note
            << '\n';
    }
}

}  // namespace valulens
