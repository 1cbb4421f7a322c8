// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 ValuLens Contributors
//
// Audit data model: categories, rival criteria, prediction records and the
// per-image recognition rule. Corpus and PredictionLog are immutable once
// built and safe to share between reader threads.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "valulens/error.hpp"

namespace valulens {

enum class ValueArea { Nutrition, Maturation, Utility, Modesty, Beauty, Wonder, Squeamishness, Other };

inline constexpr std::array<std::pair<ValueArea, std::string_view>, 8> kValueAreaNames{{
    {ValueArea::Nutrition, "nutrition"},
    {ValueArea::Maturation, "maturation"},
    {ValueArea::Utility, "utility"},
    {ValueArea::Modesty, "modesty"},
    {ValueArea::Beauty, "beauty"},
    {ValueArea::Wonder, "wonder"},
    {ValueArea::Squeamishness, "squeamishness"},
    {ValueArea::Other, "other"},
}};

inline std::string_view to_string(ValueArea area) {
    for (const auto& [a, name] : kValueAreaNames) {
        if (a == area) return name;
    }
    return "other";
}

inline std::optional<ValueArea> parse_value_area(std::string_view name) {
    for (const auto& [a, n] : kValueAreaNames) {
        if (n == name) return a;
    }
    return std::nullopt;
}

struct CategorySpec {
    std::string category_id;
    std::vector<std::string> display_labels;
    ValueArea value_area = ValueArea::Other;
    std::string overview_notes;
    std::int64_t training_set_size = 1;
    std::vector<std::string> validation_image_ids;
    /// Advisory only; twins are audited independently.
    std::vector<std::string> twin_category_ids;

    bool operator==(const CategorySpec&) const = default;
};

enum class MatchKind { ExactCategory, AnyOfCategories };

inline std::string_view to_string(MatchKind kind) {
    return kind == MatchKind::ExactCategory ? "ExactCategory" : "AnyOfCategories";
}

/// Which predicted labels count as recognizing an image.
struct MatchRule {
    MatchKind kind = MatchKind::ExactCategory;
    std::vector<std::string> accepted_category_ids;

    static MatchRule exact(std::string category_id) {
        return {MatchKind::ExactCategory, {std::move(category_id)}};
    }
    static MatchRule any_of(std::vector<std::string> category_ids) {
        return {MatchKind::AnyOfCategories, std::move(category_ids)};
    }

    bool accepts(std::string_view label) const {
        return std::find(accepted_category_ids.begin(), accepted_category_ids.end(), label) !=
               accepted_category_ids.end();
    }

    bool operator==(const MatchRule&) const = default;
};

/// Maps the recognize / does-not-recognize outcome onto the two poles of an
/// open social question, with the cultural, relational and temporal context
/// the mapping was made under.
struct ValueMapping {
    std::string open_question;
    std::string value_if_recognized;
    std::string value_if_unrecognized;
    std::string cultural_context;
    std::string relationality;
    std::string time_context;

    bool operator==(const ValueMapping&) const = default;
};

struct RivalCriterion {
    std::string criterion_id;
    /// Owning category. Empty for baseline-free criteria (e.g. "any bird
    /// category counts"), which have no single validation set.
    std::optional<std::string> category_id;
    std::string description;
    std::vector<std::string> rival_image_ids;
    std::int64_t exception_count = 0;
    /// Tagged training images; when nonempty its size is the exception count.
    std::vector<std::string> exception_image_ids;
    MatchRule recognition_rule;
    ValueMapping value_mapping;

    bool is_baseline_free() const { return !category_id.has_value(); }

    bool operator==(const RivalCriterion&) const = default;
};

inline constexpr std::size_t kDefaultRivalSetSize = 15;

class Corpus {
public:
    Corpus() = default;

    /// Validates every invariant and throws ValidationError listing all of them.
    static Corpus create(std::vector<CategorySpec> categories, std::vector<RivalCriterion> criteria);

    /// Invariant violations as "path: problem" strings; empty when valid.
    static std::vector<std::string> violations(const std::vector<CategorySpec>& categories,
                                               const std::vector<RivalCriterion>& criteria);

    const std::vector<CategorySpec>& categories() const noexcept { return categories_; }
    const std::vector<RivalCriterion>& criteria() const noexcept { return criteria_; }

    const CategorySpec* find_category(std::string_view id) const {
        auto it = category_index_.find(std::string(id));
        return it == category_index_.end() ? nullptr : &categories_[it->second];
    }
    const RivalCriterion* find_criterion(std::string_view id) const {
        auto it = criterion_index_.find(std::string(id));
        return it == criterion_index_.end() ? nullptr : &criteria_[it->second];
    }
    const CategorySpec& category(std::string_view id) const {
        if (const auto* c = find_category(id)) return *c;
        throw DomainError("unknown category: " + std::string(id));
    }
    const RivalCriterion& criterion(std::string_view id) const {
        if (const auto* c = find_criterion(id)) return *c;
        throw DomainError("unknown criterion: " + std::string(id));
    }

    /// exception_count / training_set_size of the owning category; nullopt for
    /// baseline-free criteria.
    std::optional<double> exception_fraction(const RivalCriterion& criterion) const {
        if (criterion.is_baseline_free()) return std::nullopt;
        const auto& owner = category(*criterion.category_id);
        return static_cast<double>(criterion.exception_count) /
               static_cast<double>(owner.training_set_size);
    }

    bool operator==(const Corpus& other) const {
        return categories_ == other.categories_ && criteria_ == other.criteria_;
    }

private:
    std::vector<CategorySpec> categories_;
    std::vector<RivalCriterion> criteria_;
    std::unordered_map<std::string, std::size_t> category_index_;
    std::unordered_map<std::string, std::size_t> criterion_index_;
};

inline std::vector<std::string> Corpus::violations(const std::vector<CategorySpec>& categories,
                                                   const std::vector<RivalCriterion>& criteria) {
    std::vector<std::string> out;
    auto path = [](std::string_view array, std::size_t i, std::string_view field) {
        std::string p(array);
        p += "[" + std::to_string(i) + "]";
        if (!field.empty()) {
            p += ".";
            p += field;
        }
        return p;
    };
    auto first_duplicate = [](const std::vector<std::string>& ids) -> std::optional<std::string> {
        std::unordered_set<std::string> seen;
        for (const auto& id : ids) {
            if (!seen.insert(id).second) return id;
        }
        return std::nullopt;
    };

    std::unordered_map<std::string, std::size_t> seen_categories;
    for (std::size_t i = 0; i < categories.size(); ++i) {
        const auto& c = categories[i];
        if (c.category_id.empty()) {
            out.push_back(path("categories", i, "category_id") + ": must be nonempty");
        } else if (auto [it, fresh] = seen_categories.emplace(c.category_id, i); !fresh) {
            out.push_back(path("categories", i, "category_id") + ": duplicate '" + c.category_id +
                          "' (also " + path("categories", it->second, "") + ")");
        }
        if (c.training_set_size < 1) {
            out.push_back(path("categories", i, "training_set_size") + ": must be >= 1, got " +
                          std::to_string(c.training_set_size));
        }
        if (auto dup = first_duplicate(c.validation_image_ids)) {
            out.push_back(path("categories", i, "validation_image_ids") + ": duplicate image id '" +
                          *dup + "'");
        }
    }

    std::unordered_map<std::string, std::size_t> seen_criteria;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& r = criteria[i];
        if (r.criterion_id.empty()) {
            out.push_back(path("criteria", i, "criterion_id") + ": must be nonempty");
        } else if (auto [it, fresh] = seen_criteria.emplace(r.criterion_id, i); !fresh) {
            out.push_back(path("criteria", i, "criterion_id") + ": duplicate '" + r.criterion_id +
                          "' (also " + path("criteria", it->second, "") + ")");
        }

        const CategorySpec* owner = nullptr;
        if (r.category_id) {
            auto it = seen_categories.find(*r.category_id);
            if (it == seen_categories.end()) {
                out.push_back(path("criteria", i, "category_id") + ": unknown category '" +
                              *r.category_id + "'");
            } else {
                owner = &categories[it->second];
            }
        }

        if (r.rival_image_ids.empty()) {
            out.push_back(path("criteria", i, "rival_image_ids") + ": must be nonempty");
        } else if (auto dup = first_duplicate(r.rival_image_ids)) {
            out.push_back(path("criteria", i, "rival_image_ids") + ": duplicate image id '" + *dup +
                          "'");
        }

        if (r.exception_count < 0) {
            out.push_back(path("criteria", i, "exception_count") + ": must be >= 0");
        }
        if (owner && r.exception_count > owner->training_set_size) {
            out.push_back(path("criteria", i, "exception_count") + ": " +
                          std::to_string(r.exception_count) + " exceeds training_set_size " +
                          std::to_string(owner->training_set_size) + " of '" + owner->category_id +
                          "'");
        }
        if (!r.category_id && r.exception_count != 0) {
            out.push_back(path("criteria", i, "exception_count") +
                          ": baseline-free criteria have no training set; must be 0");
        }
        if (!r.exception_image_ids.empty()) {
            if (static_cast<std::int64_t>(r.exception_image_ids.size()) != r.exception_count) {
                out.push_back(path("criteria", i, "exception_count") + ": " +
                              std::to_string(r.exception_count) + " does not match " +
                              std::to_string(r.exception_image_ids.size()) +
                              " tagged exception_image_ids");
            }
            if (auto dup = first_duplicate(r.exception_image_ids)) {
                out.push_back(path("criteria", i, "exception_image_ids") +
                              ": duplicate image id '" + *dup + "'");
            }
        }

        const auto& rule = r.recognition_rule;
        const auto rule_path = path("criteria", i, "recognition_rule.accepted_category_ids");
        if (rule.kind == MatchKind::ExactCategory && rule.accepted_category_ids.size() != 1) {
            out.push_back(rule_path + ": ExactCategory needs exactly one entry, got " +
                          std::to_string(rule.accepted_category_ids.size()));
        }
        if (rule.kind == MatchKind::AnyOfCategories && rule.accepted_category_ids.empty()) {
            out.push_back(rule_path + ": AnyOfCategories needs at least one entry");
        }

        const auto& vm = r.value_mapping;
        if (vm.value_if_recognized.empty() || vm.value_if_unrecognized.empty()) {
            out.push_back(path("criteria", i, "value_mapping") +
                          ": value_if_recognized and value_if_unrecognized must be nonempty");
        } else if (vm.value_if_recognized == vm.value_if_unrecognized) {
            out.push_back(path("criteria", i, "value_mapping") +
                          ": value_if_recognized equals value_if_unrecognized");
        }
    }
    return out;
}

inline Corpus Corpus::create(std::vector<CategorySpec> categories,
                             std::vector<RivalCriterion> criteria) {
    if (auto v = violations(categories, criteria); !v.empty()) throw ValidationError(std::move(v));
    Corpus corpus;
    corpus.categories_ = std::move(categories);
    corpus.criteria_ = std::move(criteria);
    for (std::size_t i = 0; i < corpus.categories_.size(); ++i) {
        corpus.category_index_.emplace(corpus.categories_[i].category_id, i);
    }
    for (std::size_t i = 0; i < corpus.criteria_.size(); ++i) {
        corpus.criterion_index_.emplace(corpus.criteria_[i].criterion_id, i);
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Manifest (JSON) serialization

namespace detail {

using ordered_json = nlohmann::ordered_json;

struct FieldReader {
    const nlohmann::json& object;
    std::string path;
    std::vector<std::string>& problems;

    const nlohmann::json* get(const char* key, bool required = true) const {
        auto it = object.find(key);
        if (it == object.end()) {
            if (required) problems.push_back(path + "." + key + ": missing");
            return nullptr;
        }
        return &*it;
    }

    std::string string(const char* key, bool required = true) const {
        const auto* v = get(key, required);
        if (!v) return {};
        if (!v->is_string()) {
            problems.push_back(path + "." + key + ": expected string");
            return {};
        }
        return v->get<std::string>();
    }

    std::int64_t integer(const char* key, std::int64_t fallback) const {
        const auto* v = get(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) {
            problems.push_back(path + "." + key + ": expected integer");
            return fallback;
        }
        return v->get<std::int64_t>();
    }

    std::vector<std::string> strings(const char* key, bool required = true) const {
        const auto* v = get(key, required);
        std::vector<std::string> out;
        if (!v) return out;
        if (!v->is_array()) {
            problems.push_back(path + "." + key + ": expected array of strings");
            return out;
        }
        for (std::size_t i = 0; i < v->size(); ++i) {
            if (!(*v)[i].is_string()) {
                problems.push_back(path + "." + key + "[" + std::to_string(i) +
                                   "]: expected string");
                continue;
            }
            out.push_back((*v)[i].get<std::string>());
        }
        return out;
    }
};

inline CategorySpec category_from_json(const nlohmann::json& j, const std::string& path,
                                       std::vector<std::string>& problems) {
    CategorySpec c;
    if (!j.is_object()) {
        problems.push_back(path + ": expected object");
        return c;
    }
    FieldReader r{j, path, problems};
    c.category_id = r.string("category_id");
    c.display_labels = r.strings("display_labels");
    if (auto area = r.string("value_area"); !area.empty()) {
        if (auto parsed = parse_value_area(area)) {
            c.value_area = *parsed;
        } else {
            problems.push_back(path + ".value_area: unknown value area '" + area + "'");
        }
    }
    c.overview_notes = r.string("overview_notes", false);
    c.training_set_size = r.integer("training_set_size", 0);
    c.validation_image_ids = r.strings("validation_image_ids");
    c.twin_category_ids = r.strings("twin_category_ids", false);
    return c;
}

inline RivalCriterion criterion_from_json(const nlohmann::json& j, const std::string& path,
                                          std::vector<std::string>& problems) {
    RivalCriterion c;
    if (!j.is_object()) {
        problems.push_back(path + ": expected object");
        return c;
    }
    FieldReader r{j, path, problems};
    c.criterion_id = r.string("criterion_id");
    if (const auto* owner = r.get("category_id")) {
        if (owner->is_string()) {
            c.category_id = owner->get<std::string>();
        } else if (!owner->is_null()) {
            problems.push_back(path + ".category_id: expected string or null");
        }
    }
    c.description = r.string("description", false);
    c.rival_image_ids = r.strings("rival_image_ids");
    c.exception_count = r.integer("exception_count", 0);
    c.exception_image_ids = r.strings("exception_image_ids", false);

    if (const auto* rule = r.get("recognition_rule")) {
        if (!rule->is_object()) {
            problems.push_back(path + ".recognition_rule: expected object");
        } else {
            FieldReader rr{*rule, path + ".recognition_rule", problems};
            auto kind = rr.string("kind");
            if (kind == "ExactCategory") {
                c.recognition_rule.kind = MatchKind::ExactCategory;
            } else if (kind == "AnyOfCategories") {
                c.recognition_rule.kind = MatchKind::AnyOfCategories;
            } else if (!kind.empty()) {
                problems.push_back(path + ".recognition_rule.kind: unknown kind '" + kind + "'");
            }
            c.recognition_rule.accepted_category_ids = rr.strings("accepted_category_ids");
        }
    }
    if (const auto* vm = r.get("value_mapping")) {
        if (!vm->is_object()) {
            problems.push_back(path + ".value_mapping: expected object");
        } else {
            FieldReader vr{*vm, path + ".value_mapping", problems};
            c.value_mapping.open_question = vr.string("open_question", false);
            c.value_mapping.value_if_recognized = vr.string("value_if_recognized");
            c.value_mapping.value_if_unrecognized = vr.string("value_if_unrecognized");
            c.value_mapping.cultural_context = vr.string("cultural_context", false);
            c.value_mapping.relationality = vr.string("relationality", false);
            c.value_mapping.time_context = vr.string("time_context", false);
        }
    }
    return c;
}

}  // namespace detail

template <class T>
nlohmann::ordered_json or_null(const std::optional<T>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json to_json(const CategorySpec& c) {
    return {
        {"category_id", c.category_id},
        {"display_labels", c.display_labels},
        {"value_area", std::string(to_string(c.value_area))},
        {"overview_notes", c.overview_notes},
        {"training_set_size", c.training_set_size},
        {"validation_image_ids", c.validation_image_ids},
        {"twin_category_ids", c.twin_category_ids},
    };
}

inline nlohmann::ordered_json to_json(const RivalCriterion& c) {
    nlohmann::ordered_json j;
    j["criterion_id"] = c.criterion_id;
    j["category_id"] = or_null(c.category_id);
    j["description"] = c.description;
    j["rival_image_ids"] = c.rival_image_ids;
    j["exception_count"] = c.exception_count;
    if (!c.exception_image_ids.empty()) j["exception_image_ids"] = c.exception_image_ids;
    j["recognition_rule"] = {
        {"kind", std::string(to_string(c.recognition_rule.kind))},
        {"accepted_category_ids", c.recognition_rule.accepted_category_ids},
    };
    j["value_mapping"] = {
        {"open_question", c.value_mapping.open_question},
        {"value_if_recognized", c.value_mapping.value_if_recognized},
        {"value_if_unrecognized", c.value_mapping.value_if_unrecognized},
        {"cultural_context", c.value_mapping.cultural_context},
        {"relationality", c.value_mapping.relationality},
        {"time_context", c.value_mapping.time_context},
    };
    return j;
}

inline nlohmann::ordered_json to_json(const Corpus& corpus) {
    nlohmann::ordered_json j;
    j["categories"] = nlohmann::ordered_json::array();
    for (const auto& c : corpus.categories()) j["categories"].push_back(to_json(c));
    j["criteria"] = nlohmann::ordered_json::array();
    for (const auto& c : corpus.criteria()) j["criteria"].push_back(to_json(c));
    return j;
}

/// Canonical manifest text: two-space indent, fields in declaration order,
/// trailing newline.
inline std::string dump_manifest(const Corpus& corpus) { return to_json(corpus).dump(2) + "\n"; }

inline Corpus corpus_from_json(const nlohmann::json& j) {
    std::vector<std::string> problems;
    if (!j.is_object()) throw ParseError("manifest must be a JSON object");
    std::vector<CategorySpec> categories;
    std::vector<RivalCriterion> criteria;
    auto read_array = [&](const char* key, auto&& each) {
        auto it = j.find(key);
        if (it == j.end()) {
            problems.push_back(std::string(key) + ": missing");
            return;
        }
        if (!it->is_array()) {
            problems.push_back(std::string(key) + ": expected array");
            return;
        }
        for (std::size_t i = 0; i < it->size(); ++i) {
            each((*it)[i], std::string(key) + "[" + std::to_string(i) + "]");
        }
    };
    read_array("categories", [&](const nlohmann::json& e, const std::string& p) {
        categories.push_back(detail::category_from_json(e, p, problems));
    });
    read_array("criteria", [&](const nlohmann::json& e, const std::string& p) {
        criteria.push_back(detail::criterion_from_json(e, p, problems));
    });
    if (!problems.empty()) throw ParseError("manifest does not match the schema", problems);
    return Corpus::create(std::move(categories), std::move(criteria));
}

inline Corpus parse_manifest(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed manifest: ") + e.what());
    }
    return corpus_from_json(j);
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io_error", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Corpus load_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_text_file(path));
}

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written manifest.
inline void save_manifest(const Corpus& corpus, const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io_error", "cannot write " + tmp.string());
        out << dump_manifest(corpus);
        out.flush();
        if (!out) throw Error("io_error", "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("io_error", "cannot replace " + path.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Predictions

struct LabeledScore {
    std::string label;
    double score = 0.0;

    bool operator==(const LabeledScore&) const = default;
};

/// One classifier's ordered top-k output for one image. Order is as emitted;
/// ties are never reordered.
struct PredictionRecord {
    std::string image_id;
    std::string model_id;
    int k = 5;
    std::vector<LabeledScore> topk;

    bool operator==(const PredictionRecord&) const = default;
};

/// Problems with a single record; empty when it is well formed.
inline std::vector<std::string> record_problems(const PredictionRecord& r) {
    std::vector<std::string> out;
    if (r.image_id.empty()) out.emplace_back("image_id is empty");
    if (r.model_id.empty()) out.emplace_back("model_id is empty");
    if (r.k < 1) out.push_back("k must be >= 1, got " + std::to_string(r.k));
    if (static_cast<int>(r.topk.size()) != r.k) {
        out.push_back("topk has " + std::to_string(r.topk.size()) + " entries, k = " +
                      std::to_string(r.k));
    }
    std::unordered_set<std::string> labels;
    for (std::size_t i = 0; i < r.topk.size(); ++i) {
        const auto& e = r.topk[i];
        if (!labels.insert(e.label).second) out.push_back("duplicate label '" + e.label + "'");
        if (!(e.score >= 0.0 && e.score <= 1.0)) {
            out.push_back("score at rank " + std::to_string(i + 1) + " outside [0,1]");
        }
        if (i > 0 && e.score > r.topk[i - 1].score) {
            out.push_back("scores not nonincreasing at rank " + std::to_string(i + 1));
        }
    }
    return out;
}

class PredictionLog {
public:
    using Key = std::pair<std::string, std::string>;  // (model_id, image_id)

    const PredictionRecord* find(std::string_view model_id, std::string_view image_id) const {
        auto it = records_.find(Key{std::string(model_id), std::string(image_id)});
        return it == records_.end() ? nullptr : &it->second;
    }

    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    std::set<std::string> model_ids() const {
        std::set<std::string> out;
        for (const auto& [model, k] : k_by_model_) out.insert(model);
        return out;
    }

    std::optional<int> k_for(std::string_view model_id) const {
        auto it = k_by_model_.find(std::string(model_id));
        if (it == k_by_model_.end()) return std::nullopt;
        return it->second;
    }

    /// Header lines seen at ingest (adapter provenance), in input order.
    const std::vector<nlohmann::json>& headers() const noexcept { return headers_; }

    /// Records in (model_id, image_id) order.
    const std::map<Key, PredictionRecord>& records() const noexcept { return records_; }

    /// Returns a new log containing this one plus `batch`. All-or-nothing: on
    /// any problem throws IngestError and leaves this log untouched.
    PredictionLog with(std::span<const PredictionRecord> batch) const {
        PredictionLog next = *this;
        std::vector<std::string> problems;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto& r = batch[i];
            const auto where = "record " + std::to_string(i + 1) + " (" + r.model_id + ", " +
                               r.image_id + ")";
            auto own = record_problems(r);
            for (auto& p : own) problems.push_back(where + ": " + p);
            if (!own.empty()) continue;
            auto [kit, fresh_model] = next.k_by_model_.emplace(r.model_id, r.k);
            if (!fresh_model && kit->second != r.k) {
                problems.push_back(where + ": k = " + std::to_string(r.k) + " but model '" +
                                   r.model_id + "' uses k = " + std::to_string(kit->second));
                continue;
            }
            if (!next.records_.emplace(Key{r.model_id, r.image_id}, r).second) {
                problems.push_back(where + ": duplicate record for (model_id, image_id)");
            }
        }
        if (!problems.empty()) throw IngestError(std::move(problems));
        return next;
    }

    PredictionLog with_headers(std::vector<nlohmann::json> headers) const {
        PredictionLog next = *this;
        for (auto& h : headers) next.headers_.push_back(std::move(h));
        return next;
    }

private:
    std::map<Key, PredictionRecord> records_;
    std::map<std::string, int> k_by_model_;
    std::vector<nlohmann::json> headers_;
};

inline nlohmann::ordered_json to_json(const PredictionRecord& r) {
    nlohmann::ordered_json topk = nlohmann::ordered_json::array();
    for (const auto& e : r.topk) topk.push_back({{"label", e.label}, {"score", e.score}});
    return {{"image_id", r.image_id}, {"model_id", r.model_id}, {"k", r.k}, {"topk", topk}};
}

/// Parses one line of the prediction-log wire format. Header lines (objects
/// carrying a "header" key) yield nullopt and are returned through `header`.
inline std::optional<PredictionRecord> parse_prediction_line(std::string_view line,
                                                             nlohmann::json* header = nullptr) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed record: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("record must be a JSON object");
    if (j.contains("header")) {
        if (header) *header = j["header"];
        return std::nullopt;
    }
    PredictionRecord r;
    try {
        r.image_id = j.at("image_id").get<std::string>();
        r.model_id = j.at("model_id").get<std::string>();
        r.k = j.at("k").get<int>();
        for (const auto& e : j.at("topk")) {
            r.topk.push_back({e.at("label").get<std::string>(), e.at("score").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("record does not match the schema: ") + e.what());
    }
    return r;
}

/// Reads a line-delimited prediction log and merges it into `base` as one
/// batch. Blank lines are skipped. Throws IngestError listing every rejected
/// line; nothing is merged unless the whole batch is clean.
inline PredictionLog ingest_predictions(std::istream& in, const PredictionLog& base = {}) {
    std::vector<PredictionRecord> batch;
    std::vector<nlohmann::json> headers;
    std::vector<std::string> problems;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            nlohmann::json header;
            if (auto r = parse_prediction_line(line, &header)) {
                batch.push_back(std::move(*r));
            } else {
                headers.push_back(std::move(header));
            }
        } catch (const ParseError& e) {
            problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!problems.empty()) throw IngestError(std::move(problems));
    return base.with(batch).with_headers(std::move(headers));
}

inline PredictionLog load_predictions(const std::filesystem::path& path,
                                      const PredictionLog& base = {}) {
    std::ifstream in(path);
    if (!in) throw Error("io_error", "cannot open " + path.string());
    return ingest_predictions(in, base);
}

/// One JSON object per line in (model_id, image_id) order. Scores keep 17
/// significant digits so re-ingest is lossless.
inline void write_predictions(std::ostream& out, const PredictionLog& log) {
    for (const auto& h : log.headers()) out << nlohmann::json{{"header", h}}.dump() << '\n';
    for (const auto& [key, r] : log.records()) out << to_json(r).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Recognition

/// True iff any of the first `k_eval` labels is accepted by `rule`.
inline bool is_recognized(const PredictionRecord& record, const MatchRule& rule, int k_eval) {
    if (k_eval < 1) throw DomainError("k_eval must be >= 1");
    if (k_eval > record.k || k_eval > static_cast<int>(record.topk.size())) {
        throw DomainError("k_eval " + std::to_string(k_eval) + " exceeds recorded k " +
                          std::to_string(record.k) + " for " + record.image_id);
    }
    return std::any_of(record.topk.begin(), record.topk.begin() + k_eval,
                       [&](const LabeledScore& e) { return rule.accepts(e.label); });
}

struct RecognitionCounts {
    std::int64_t recognized = 0;
    std::int64_t total = 0;

    double rate() const {
        return total == 0 ? 0.0 : static_cast<double>(recognized) / static_cast<double>(total);
    }
    bool operator==(const RecognitionCounts&) const = default;
};

inline RecognitionCounts counts_for(const PredictionLog& log, std::string_view model_id,
                                    std::span<const std::string> image_ids, const MatchRule& rule,
                                    int k_eval) {
    RecognitionCounts counts;
    std::vector<std::string> missing;
    for (const auto& id : image_ids) {
        const auto* record = log.find(model_id, id);
        if (!record) {
            missing.push_back(id);
            continue;
        }
        ++counts.total;
        if (is_recognized(*record, rule, k_eval)) ++counts.recognized;
    }
    if (!missing.empty()) {
        throw CoverageError("model '" + std::string(model_id) + "' has no record for " +
                                std::to_string(missing.size()) + " image(s)",
                            std::move(missing));
    }
    return counts;
}

}  // namespace valulens
