// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 ValuLens Contributors
//
// Test fixtures: a small builder for corpora and prediction logs, the
// four-model sock/hay/eggs fixture, and the synthetic population fixture.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "valulens/valulens.hpp"

namespace valulens::testing {

inline const std::vector<std::string>& four_models() {
    static const std::vector<std::string> models{"vgg16", "resnet50", "inceptionv3",
                                                 "nasnetlarge"};
    return models;
}

inline std::string numbered(const std::string& prefix, int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d", i);
    return prefix + buf;
}

inline std::vector<std::string> numbered_ids(const std::string& prefix, int n) {
    std::vector<std::string> ids;
    for (int i = 1; i <= n; ++i) ids.push_back(numbered(prefix, i));
    return ids;
}

/// k labels with strictly decreasing scores. `hit` (if nonempty) is placed at
/// 1-based `rank`; the rest are filler labels that never match a category.
inline PredictionRecord make_record(const std::string& model, const std::string& image,
                                    const std::string& hit, int rank = 1, int k = 5) {
    PredictionRecord r;
    r.model_id = model;
    r.image_id = image;
    r.k = k;
    double score = 0.6;
    int filler = 0;
    for (int pos = 1; pos <= k; ++pos) {
        std::string label = (!hit.empty() && pos == rank) ? hit : "filler-" + std::to_string(++filler);
        r.topk.push_back({label, score});
        score /= 2.0;
    }
    return r;
}

inline ValueMapping mapping(const std::string& yes, const std::string& no) {
    ValueMapping m;
    m.open_question = "";
    m.value_if_recognized = yes;
    m.value_if_unrecognized = no;
    return m;
}

inline CategorySpec category(const std::string& id, const std::string& label, ValueArea area,
                             int training, int validation) {
    CategorySpec c;
    c.category_id = id;
    c.display_labels = {label};
    c.value_area = area;
    c.training_set_size = training;
    c.validation_image_ids = numbered_ids(id + "-val-", validation);
    return c;
}

struct Fixture {
    Corpus corpus;
    PredictionLog log;
};

// Synset ids used by the sock fixture.
inline const std::string kSock = "n04254777";
inline const std::string kHay = "n07802026";
inline const std::string kHen = "n01514859";
inline const std::string kGoose = "n01855672";
inline const std::string kQuail = "n01806567";

/// Rival recognition per model for the partially hidden sock set (15 images,
/// top-5), transcribed image by image from the published table.
inline const std::map<std::string, std::set<int>>& sock_rival_hits() {
    static const std::map<std::string, std::set<int>> hits{
        {"vgg16", {1, 7, 13, 14}},
        {"resnet50", {6, 7, 8, 9, 10, 13, 14}},
        {"inceptionv3", {1, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14}},
        {"nasnetlarge", {1, 4, 6, 7, 10, 11, 13, 14}},
    };
    return hits;
}

/// Validation counts out of 50. VGG-16 and InceptionV3 are printed; ResNet50
/// and NASNetLarge are chosen to reproduce their printed p-values (.05, .004).
inline const std::map<std::string, int>& sock_validation_hits() {
    static const std::map<std::string, int> hits{
        {"vgg16", 37}, {"resnet50", 38}, {"inceptionv3", 44}, {"nasnetlarge", 45}};
    return hits;
}

inline const std::map<std::string, int>& hay_validation_hits() {
    static const std::map<std::string, int> hits{
        {"vgg16", 44}, {"resnet50", 45}, {"inceptionv3", 46}, {"nasnetlarge", 48}};
    return hits;
}

/// sock (criterion "sock-hidden"), hay ("hay-eaten") and the baseline-free
/// "eggs" criterion across four models; 145 records per model.
inline Fixture sock_fixture() {
    std::vector<CategorySpec> categories{
        category(kSock, "sock", ValueArea::Modesty, 1300, 50),
        category(kHay, "hay", ValueArea::Nutrition, 1300, 50),
        category(kHen, "hen", ValueArea::Nutrition, 1300, 0),
        category(kGoose, "goose", ValueArea::Nutrition, 1300, 0),
    };

    RivalCriterion sock;
    sock.criterion_id = "sock-hidden";
    sock.category_id = kSock;
    sock.description = "shoe worn on top, and/or pant/skirt/dress bottom covering the top up";
    sock.rival_image_ids = numbered_ids("sock-rival-", 15);
    sock.exception_count = 125;
    sock.recognition_rule = MatchRule::exact(kSock);
    sock.value_mapping = mapping("immodest viewing", "modest viewing");

    RivalCriterion hay;
    hay.criterion_id = "hay-eaten";
    hay.category_id = kHay;
    hay.description = "being eaten by animals";
    hay.rival_image_ids = numbered_ids("hay-rival-", 15);
    hay.exception_count = 40;
    hay.recognition_rule = MatchRule::exact(kHay);
    hay.value_mapping = mapping("nutritious for animals", "not nutritious for animals");

    RivalCriterion eggs;
    eggs.criterion_id = "eggs";
    eggs.description = "variety of eggs [any bird category counts as correct]";
    eggs.rival_image_ids = numbered_ids("eggs-rival-", 15);
    eggs.recognition_rule = MatchRule::any_of({kHen, kGoose, kQuail});
    eggs.value_mapping = mapping("eggs are birds", "eggs are not birds");

    Fixture f;
    f.corpus = Corpus::create(std::move(categories), {sock, hay, eggs});

    std::vector<PredictionRecord> records;
    for (const auto& model : four_models()) {
        const auto& hits = sock_rival_hits().at(model);
        for (int i = 1; i <= 15; ++i) {
            records.push_back(make_record(model, numbered("sock-rival-", i),
                                          hits.count(i) ? kSock : "", 1));
            records.push_back(make_record(model, numbered("hay-rival-", i), ""));
            // One egg image is taken for a hen, another for a goose at rank 4.
            std::string egg_hit = i == 3 ? kHen : "";
            if (model != "vgg16" && i == 9) egg_hit = kGoose;
            records.push_back(make_record(model, numbered("eggs-rival-", i), egg_hit, i == 9 ? 4 : 1));
        }
        for (int i = 1; i <= 50; ++i) {
            records.push_back(make_record(model, numbered(kSock + "-val-", i),
                                          i <= sock_validation_hits().at(model) ? kSock : ""));
            records.push_back(make_record(model, numbered(kHay + "-val-", i),
                                          i <= hay_validation_hits().at(model) ? kHay : ""));
        }
    }
    f.log = PredictionLog{}.with(records);
    return f;
}

inline std::string to_jsonl(const PredictionLog& log) {
    std::ostringstream out;
    write_predictions(out, log);
    return out.str();
}

inline std::string read_file(const std::filesystem::path& p) { return read_text_file(p); }

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// A scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0;; ++i) {
            path_ = base / ("valulens-test-" + std::to_string(::getpid()) + "-" +
                            std::to_string(counter()++) + "-" + std::to_string(i));
            if (std::filesystem::create_directories(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Population fixture (tests/data/population_fixture.tsv)

struct PlantedCounts {
    int rival_top5 = 0;
    int val_top5 = 0;
    int rival_top1 = 0;
    int val_top1 = 0;
    std::string decision_top5;
    std::string decision_top1;
};

struct PlantedExpectation {
    bool flip_top5 = false;
    bool flip_top1 = false;
    bool monotonic_rival = false;
    bool monotonic_val = false;
};

struct PopulationFixture {
    Fixture fixture;
    std::vector<std::string> criteria;  // in file order
    std::map<std::string, std::map<std::string, PlantedCounts>> planted;  // criterion -> model
    std::map<std::string, PlantedExpectation> expected;
    std::map<std::string, std::pair<int, int>> rival_sums;  // model -> (recognized, total)
};

inline std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> fields;
        std::istringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        rows.push_back(fields);
    }
    return rows;
}

/// Builds one category per planted criterion. Recognized images carry the
/// category label at rank 1 when they are also top-1 hits, else at rank 3.
inline PopulationFixture population_fixture(const std::filesystem::path& data_dir) {
    PopulationFixture pf;
    for (const auto& row : read_tsv(data_dir / "population_fixture.tsv")) {
        PlantedCounts c{std::stoi(row[2]), std::stoi(row[3]), std::stoi(row[4]),
                        std::stoi(row[5]), row[6], row[7]};
        if (!pf.planted.count(row[0])) pf.criteria.push_back(row[0]);
        pf.planted[row[0]][row[1]] = c;
    }
    for (const auto& row : read_tsv(data_dir / "population_expected.tsv")) {
        if (row[0] == "#mean") {
            pf.rival_sums[row[1]] = {std::stoi(row[2]), std::stoi(row[3])};
            continue;
        }
        pf.expected[row[0]] = {row[1] == "1", row[2] == "1", row[3] == "1", row[4] == "1"};
    }

    std::vector<CategorySpec> categories;
    std::vector<RivalCriterion> criteria;
    std::vector<PredictionRecord> records;
    for (const auto& name : pf.criteria) {
        const std::string cat_id = "cat-" + name;
        categories.push_back(category(cat_id, name, ValueArea::Other, 1300, 50));
        RivalCriterion rc;
        rc.criterion_id = name;
        rc.category_id = cat_id;
        rc.description = "planted";
        rc.rival_image_ids = numbered_ids(name + "-rival-", 15);
        rc.recognition_rule = MatchRule::exact(cat_id);
        rc.value_mapping = mapping("recognized", "not recognized");
        criteria.push_back(rc);

        for (const auto& model : four_models()) {
            const auto& c = pf.planted.at(name).at(model);
            auto emit = [&](const std::vector<std::string>& ids, int top1, int top5) {
                // top1 <= top5 by construction of the fixture.
                for (int i = 0; i < static_cast<int>(ids.size()); ++i) {
                    if (i < top1) {
                        records.push_back(make_record(model, ids[i], cat_id, 1));
                    } else if (i < top5) {
                        records.push_back(make_record(model, ids[i], cat_id, 3));
                    } else {
                        records.push_back(make_record(model, ids[i], ""));
                    }
                }
            };
            emit(rc.rival_image_ids, c.rival_top1, c.rival_top5);
            emit(categories.back().validation_image_ids, c.val_top1, c.val_top5);
        }
    }
    pf.fixture.corpus = Corpus::create(std::move(categories), std::move(criteria));
    pf.fixture.log = PredictionLog{}.with(records);
    return pf;
}

}  // namespace valulens::testing
