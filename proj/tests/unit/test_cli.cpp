// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 ValuLens Contributors

#include <sys/wait.h>

#include <cstdio>

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace vl = valulens;

namespace {

struct Outcome {
    int status = -1;
    std::string out;
    std::string err;
};

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        auto f = vl::testing::sock_fixture();
        vl::save_manifest(f.corpus, dir_ / "manifest.json");
        vl::testing::write_file(dir_ / "log.jsonl", vl::testing::to_jsonl(f.log));
    }

    Outcome run(const std::vector<std::string>& args) const {
        std::string cmd = quote(VALULENS_CLI_PATH);
        for (const auto& a : args) cmd += " " + quote(a);
        const auto err_path = dir_ / "stderr.txt";
        cmd += " 2>" + quote(err_path.string());
        Outcome r;
        FILE* pipe = ::popen(cmd.c_str(), "r");
        if (!pipe) return r;
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
        const int raw = ::pclose(pipe);
        r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
        r.err = vl::testing::read_file(err_path);
        return r;
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::vector<std::string> inputs() const {
        return {"--manifest", path("manifest.json"), "--log", path("log.jsonl")};
    }

    std::vector<std::string> with_inputs(std::vector<std::string> args) const {
        auto in = inputs();
        args.insert(args.begin() + 1, in.begin(), in.end());
        return args;
    }

    vl::testing::TempDir dir_;
};

nlohmann::json error_of(const Outcome& r) {
    auto first_line = r.err.substr(0, r.err.find('\n'));
    return nlohmann::json::parse(first_line);
}

}  // namespace

TEST_F(CliTest, ValidateGoodManifest) {
    auto r = run({"validate", path("manifest.json")});
    EXPECT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(r.out, "ok: 4 categories, 3 criteria (1 baseline-free)\n");
}

TEST_F(CliTest, ValidateMalformedManifestListsViolations) {
    auto text = vl::testing::read_file(dir_ / "manifest.json");
    auto j = nlohmann::json::parse(text);
    j["categories"][1]["category_id"] = j["categories"][0]["category_id"];
    j["criteria"][0]["exception_count"] = 99999;
    vl::testing::write_file(dir_ / "bad.json", j.dump());
    auto r = run({"validate", path("bad.json")});
    EXPECT_EQ(r.status, 1);
    auto e = error_of(r);
    EXPECT_EQ(e["error"]["code"], "validation_error");
    EXPECT_GE(e["error"]["details"].size(), 2u);

    vl::testing::write_file(dir_ / "broken.json", "{\"categories\": [");
    r = run({"validate", path("broken.json")});
    EXPECT_EQ(r.status, 1);
    EXPECT_EQ(error_of(r)["error"]["code"], "parse_error");
}

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(run({"frobnicate"}).status, 2);
    EXPECT_EQ(run({"validate", path("manifest.json"), "--bogus"}).status, 2);
    auto r = run({});
    EXPECT_EQ(r.status, 2);
    EXPECT_EQ(error_of(r)["error"]["code"], "usage_error");
    EXPECT_EQ(run({"assess", "--manifest", path("manifest.json")}).status, 2);
}

TEST_F(CliTest, AssessSockVgg) {
    auto r = run(with_inputs({"assess", "--model", "vgg16", "--criterion", "sock-hidden"}));
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_NE(r.out.find("p=0.00167"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("decision=DoesNotRecognize"), std::string::npos);
    EXPECT_NE(r.out.find("rival=4/15 (26.7%)"), std::string::npos);
    EXPECT_NE(r.out.find("val=37/50 (74.0%)"), std::string::npos);
    EXPECT_NE(r.out.find("enacted=modest viewing"), std::string::npos);
}

TEST_F(CliTest, AssessJsonAndIndeterminate) {
    auto r = run(with_inputs({"assess", "--model", "resnet50", "--json"}));
    ASSERT_EQ(r.status, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::map<std::string, nlohmann::json> rows;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        rows[j["criterion_id"]] = j;
    }
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows["sock-hidden"]["decision"], "Indeterminate");
    EXPECT_EQ(rows["sock-hidden"]["needs_more_images"], true);
    EXPECT_EQ(rows["sock-hidden"]["enacted_value"], "unclear");
    EXPECT_TRUE(rows["eggs"]["p_value"].is_null());
    EXPECT_EQ(rows["eggs"]["enacted_value"], "baseline-free");
}

TEST_F(CliTest, AssessUnknownModelIsCoverageError) {
    auto r = run(with_inputs({"assess", "--model", "alexnet", "--criterion", "sock-hidden"}));
    EXPECT_EQ(r.status, 1);
    auto e = error_of(r);
    EXPECT_EQ(e["error"]["code"], "coverage_error");
    EXPECT_EQ(e["error"]["details"].size(), 65u);
}

TEST_F(CliTest, CompareReportsOneFlip) {
    auto r = run(with_inputs({"compare", "--models", "vgg16,resnet50,inceptionv3,nasnetlarge", "--top1"}));
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_NE(r.out.find("# flips: 1 of 2 criteria"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("# still flipping at top-1: 1 sock-hidden"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("sock-hidden\tDoesNotRecognize 27%/74%\tIndeterminate 47%/76%\t"
                         "Recognizes 80%/88%\tDoesNotRecognize 53%/90%\tyes"),
              std::string::npos)
        << r.out;
}

TEST_F(CliTest, AccuracyPerCategory) {
    auto r = run(with_inputs({"accuracy", "--model", "vgg16", "--category", vl::testing::kSock}));
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_NE(r.out.find("accuracy=0.74 (74.0%)"), std::string::npos) << r.out;
}

TEST_F(CliTest, IngestWritesCanonicalLog) {
    auto r = run({"ingest", path("log.jsonl"), "--out", path("db.jsonl")});
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(r.out, "ingested 580 records from 4 model(s)\n");
    EXPECT_EQ(vl::testing::read_file(dir_ / "db.jsonl"), vl::testing::read_file(dir_ / "log.jsonl"));

    auto r2 = run({"ingest", path("log.jsonl"), path("log.jsonl"), "--out", path("twice.jsonl")});
    EXPECT_EQ(r2.status, 1);
    EXPECT_EQ(error_of(r2)["error"]["code"], "ingest_error");
    EXPECT_FALSE(std::filesystem::exists(dir_ / "twice.jsonl"));
}

TEST_F(CliTest, ReportFormats) {
    auto tsv = run(with_inputs({"report", "--model", "vgg16", "--format", "tsv"}));
    ASSERT_EQ(tsv.status, 0) << tsv.err;
    EXPECT_NE(tsv.out.find("\tvgg16\t27%\t74%\tLow\n"), std::string::npos) << tsv.out;
    auto again = run(with_inputs({"report", "--model", "vgg16", "--format", "tsv"}));
    EXPECT_EQ(again.out, tsv.out);

    auto file = run(with_inputs({"report", "--models", "vgg16,nasnetlarge", "--format", "json",
                                 "--out", path("report.jsonl")}));
    ASSERT_EQ(file.status, 0) << file.err;
    EXPECT_NE(vl::testing::read_file(dir_ / "report.jsonl").find("\"model_id\":\"nasnetlarge\""),
              std::string::npos);

    auto bad = run(with_inputs({"report", "--model", "vgg16", "--format", "xlsx"}));
    EXPECT_EQ(bad.status, 1);
}

TEST_F(CliTest, DphScatter) {
    auto r = run(with_inputs({"dph", "--models", "vgg16,resnet50,inceptionv3,nasnetlarge", "--out",
                              path("scatter.tsv")}));
    ASSERT_EQ(r.status, 0) << r.err;
    auto scatter = vl::testing::read_file(dir_ / "scatter.tsv");
    EXPECT_EQ(scatter.rfind("kind\tmodel_id\tcriterion_id\tx\ty\n", 0), 0u);
    EXPECT_NE(r.out.find("vgg16  n=2"), std::string::npos) << r.out;

    auto none = run(with_inputs({"dph", "--models", "vgg16", "--max-fraction", "0.01"}));
    EXPECT_EQ(none.status, 0);
    EXPECT_EQ(none.out, "kind\tmodel_id\tcriterion_id\tx\ty\n");
}

TEST_F(CliTest, RegeneratePrintedTable) {
    auto r = run({"regenerate", std::string(VALULENS_TEST_DATA_DIR) + "/printed_vgg16.tsv"});
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(r.out.rfind("# compared 115, matched 111 (96.5%)", 0), 0u) << r.out;
}

TEST_F(CliTest, ServeRejectsBadManifest) {
    vl::testing::write_file(dir_ / "broken.json", "[");
    auto r = run({"serve", "--manifest", path("broken.json"), "--port", "0"});
    EXPECT_EQ(r.status, 1);
    EXPECT_EQ(error_of(r)["error"]["code"], "parse_error");
}
