// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 ValuLens Contributors
//
// valulens: command-line front end.
//
// Exit status: 0 success, 1 runtime error (JSON on stderr), 2 usage error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "valulens/valulens.hpp"

namespace vl = valulens;

namespace {

void print_error(std::string_view code, std::string_view message,
                 const std::vector<std::string>& details = {}) {
    std::cerr << vl::error_body(code, message, details).dump() << '\n';
}

vl::PredictionLog load_logs(const std::vector<std::string>& paths) {
    vl::PredictionLog log;
    for (const auto& p : paths) log = vl::load_predictions(p, log);
    return log;
}

/// Writes to `path`, or stdout when it is empty. Files go through a temporary
/// sibling so a failed run never leaves a truncated report behind.
template <typename Emit>
void write_output(const std::string& path, Emit&& emit) {
    if (path.empty() || path == "-") {
        emit(std::cout);
        std::cout.flush();
        return;
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw vl::Error("io_error", "cannot write " + tmp);
        emit(out);
        out.flush();
        if (!out) throw vl::Error("io_error", "short write to " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw vl::Error("io_error", "cannot replace " + path + ": " + ec.message());
}

std::string counts_label(const vl::RecognitionCounts& c) {
    return std::to_string(c.recognized) + "/" + std::to_string(c.total) + " (" +
           vl::format_percent1(c.rate()) + ")";
}

struct Inputs {
    std::string manifest;
    std::vector<std::string> logs;
    int k = 5;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--manifest,-m", manifest, "corpus manifest (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--log,-l", logs, "prediction log (JSONL); repeatable")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--k", k, "top-k depth for recognition")->check(CLI::PositiveNumber);
    }
};

int run_validate(const std::string& path) {
    auto corpus = vl::load_manifest(path);
    std::size_t hybrid = 0;
    for (const auto& c : corpus.criteria()) hybrid += c.is_baseline_free();
    std::cout << "ok: " << corpus.categories().size() << " categories, " << corpus.criteria().size()
              << " criteria (" << hybrid << " baseline-free)\n";
    return 0;
}

int run_ingest(const std::vector<std::string>& paths, const std::string& out) {
    auto log = load_logs(paths);
    write_output(out, [&](std::ostream& os) { vl::write_predictions(os, log); });
    auto& summary = out == "-" ? std::cerr : std::cout;
    summary << "ingested " << log.size() << " records from " << log.model_ids().size()
            << " model(s)\n";
    return 0;
}

int run_assess(const Inputs& in, const std::string& model, const std::string& criterion, bool json) {
    auto corpus = vl::load_manifest(in.manifest);
    auto log = load_logs(in.logs);
    std::vector<std::string> ids;
    if (criterion.empty()) {
        for (const auto& c : corpus.criteria()) ids.push_back(c.criterion_id);
    } else {
        ids.push_back(criterion);
    }
    for (const auto& id : ids) {
        const auto r = vl::evaluate_criterion(corpus, log, model, id, in.k);
        if (json) {
            nlohmann::ordered_json j;
            j["criterion_id"] = r.criterion_id;
            j["model_id"] = r.model_id;
            j["k"] = r.k_eval;
            j["rival"] = {r.rival_counts.recognized, r.rival_counts.total};
            j["validation"] = r.val_counts ? nlohmann::ordered_json{r.val_counts->recognized,
                                                                    r.val_counts->total}
                                           : nlohmann::ordered_json(nullptr);
            if (r.assessment) {
                j["p_value"] = r.assessment->p_value;
                j["bucket"] = std::string(vl::to_string(r.assessment->bucket));
                j["decision"] = std::string(vl::to_string(r.assessment->decision));
                j["needs_more_images"] = r.assessment->needs_more_images;
            } else {
                j["p_value"] = nullptr;
                j["bucket"] = nullptr;
                j["decision"] = nullptr;
                j["needs_more_images"] = false;
            }
            j["enacted_value"] = r.enacted_value;
            std::cout << j.dump() << '\n';
            continue;
        }
        std::cout << r.criterion_id << "  model=" << r.model_id << "  k=" << r.k_eval
                  << "  rival=" << counts_label(r.rival_counts);
        if (r.assessment) {
            const auto& a = *r.assessment;
            std::cout << "  val=" << counts_label(*r.val_counts) << "  p=" << vl::format_p(a.p_value)
                      << "  bucket=" << vl::to_string(a.bucket)
                      << "  decision=" << vl::to_string(a.decision);
            if (auto aug = vl::needs_augmentation(a); aug.needed) {
                std::cout << "  (add " << aug.additional_images << " rival images)";
            }
        } else {
            std::cout << "  val=N/A";
        }
        std::cout << "  enacted=" << r.enacted_value << '\n';
    }
    return 0;
}

int run_accuracy(const Inputs& in, const std::string& model, const std::string& category) {
    auto corpus = vl::load_manifest(in.manifest);
    auto log = load_logs(in.logs);
    std::optional<std::string_view> scope;
    if (!category.empty()) scope = category;
    const double acc = vl::validation_accuracy(corpus, log, model, scope, in.k);
    std::cout << model << "  k=" << in.k << "  scope=" << (category.empty() ? "all" : category)
              << "  accuracy=" << vl::format_real(acc) << " (" << vl::format_percent1(acc) << ")\n";
    return 0;
}

int run_compare(const Inputs& in, const std::vector<std::string>& models, bool narrow) {
    auto corpus = vl::load_manifest(in.manifest);
    auto log = load_logs(in.logs);
    const auto results = vl::evaluate_all(corpus, log, models, in.k);
    const auto report = vl::compare_models(results, models);

    std::cout << "criterion";
    for (const auto& m : models) std::cout << '\t' << m;
    std::cout << "\tflip\tmonotonic_rival\tmonotonic_val\n";
    for (const auto& c : report.criteria) {
        std::cout << c.criterion_id;
        for (std::size_t i = 0; i < c.decisions.size(); ++i) {
            std::cout << '\t' << vl::to_string(c.decisions[i]) << ' '
                      << vl::format_percent0(c.rival_counts[i].rate()) << '/'
                      << vl::format_percent0(c.val_counts[i].rate());
        }
        std::cout << '\t' << (c.flip ? "yes" : "no") << '\t' << (c.monotonic_rival ? "yes" : "no")
                  << '\t' << (c.monotonic_val ? "yes" : "no") << '\n';
    }
    std::cout << "# flips: " << report.flip_count() << " of " << report.criteria.size()
              << " criteria\n";
    std::cout << "# monotonic rival: " << report.monotonic_rival_count()
              << ", monotonic rival and validation: " << report.monotonic_both_count() << '\n';
    for (const auto& m : models) {
        std::vector<vl::CriterionResult> mine;
        for (const auto& r : results) {
            if (r.model_id == m) mine.push_back(r);
        }
        std::cout << "# averaged rival accuracy " << m << ": "
                  << vl::format_percent1(vl::averaged_rival_accuracy(mine)) << '\n';
    }
    if (narrow) {
        const auto top1 = vl::evaluate_all(corpus, log, models, 1);
        const auto kept = vl::top1_narrowing(top1, results, models);
        std::cout << "# still flipping at top-1: " << kept.size();
        for (const auto& id : kept) std::cout << ' ' << id;
        std::cout << '\n';
    }
    return 0;
}

int run_dph(const Inputs& in, const std::vector<std::string>& models, double max_fraction,
            const std::string& out) {
    auto corpus = vl::load_manifest(in.manifest);
    auto log = load_logs(in.logs);
    const auto results = vl::evaluate_all(corpus, log, models, in.k);
    const auto points = vl::dph_points(corpus, results, max_fraction);
    std::map<std::string, vl::RegressionFit> fits;
    for (const auto& [model, pts] : vl::group_by_model(points)) fits.emplace(model, vl::fit_dph(pts));
    write_output(out, [&](std::ostream& os) { vl::emit_dph_scatter(os, points, fits); });
    auto& summary = (out.empty() || out == "-") ? std::cerr : std::cout;
    for (const auto& [model, fit] : fits) {
        summary << model << "  n=" << fit.n << "  slope=" << vl::format_real(fit.slope)
                << "  intercept=" << vl::format_real(fit.intercept)
                << "  r2=" << vl::format_real(fit.r_squared) << '\n';
    }
    return 0;
}

int run_report(const Inputs& in, const std::vector<std::string>& models, const std::string& format,
               const std::string& out) {
    auto fmt = vl::parse_table_format(format);
    if (!fmt) throw vl::DomainError("unknown format '" + format + "' (tsv, text, json)");
    auto corpus = vl::load_manifest(in.manifest);
    auto log = load_logs(in.logs);
    const auto results = vl::evaluate_all(corpus, log, models, in.k);
    const auto rows = vl::make_report_rows(corpus, results);
    write_output(out, [&](std::ostream& os) { vl::emit_assessment_table(os, rows, *fmt); });
    return 0;
}

int run_regenerate(const std::string& printed, const std::string& out) {
    std::ifstream in(printed);
    if (!in) throw vl::Error("io_error", "cannot open " + printed);
    const auto rows = vl::read_printed_table(in);
    const auto regen = vl::regenerate_printed_table(rows);
    write_output(out, [&](std::ostream& os) { vl::emit_discrepancy_report(os, regen); });
    return 0;
}

int run_serve(const std::string& manifest, std::string image_root, const std::string& host, int port) {
    if (image_root.empty()) {
        if (const char* env = std::getenv(vl::kImageRootEnv)) image_root = env;
    }
    std::optional<std::filesystem::path> root;
    if (!image_root.empty()) root = image_root;
    vl::CurationService service(manifest, root);

    httplib::Server server;
    auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
        const auto out = service.handle(req.method, req.path, req.body);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    server.Get("/.*", bridge);
    server.Put("/.*", bridge);
    server.Post("/.*", bridge);
    server.Delete("/.*", bridge);
    if (!server.bind_to_port(host, port)) {
        throw vl::Error("io_error", "cannot bind " + host + ":" + std::to_string(port));
    }
    std::cerr << "serving " << manifest << " on http://" << host << ":" << port << '\n';
    server.listen_after_bind();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"valulens: audit the values enacted by image classifiers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "valulens 0.1.0");

    std::string manifest_path;
    auto* validate = app.add_subcommand("validate", "check a manifest against every invariant");
    validate->add_option("manifest", manifest_path)->required();

    std::vector<std::string> ingest_logs;
    std::string out;
    auto* ingest = app.add_subcommand("ingest", "validate prediction logs and write one canonical log");
    ingest->add_option("logs", ingest_logs, "prediction logs (JSONL)")->required()->check(CLI::ExistingFile);
    ingest->add_option("--out,-o", out, "canonical log output")->required();

    Inputs inputs;
    std::string model;
    std::string criterion;
    bool json = false;
    auto* assess = app.add_subcommand("assess", "assess criteria for one model");
    inputs.add_to(assess);
    assess->add_option("--model", model)->required();
    assess->add_option("--criterion", criterion, "one criterion id (default: all)");
    assess->add_flag("--json", json, "one JSON object per criterion");

    std::string category;
    auto* accuracy = app.add_subcommand("accuracy", "validation accuracy for one model");
    inputs.add_to(accuracy);
    accuracy->add_option("--model", model)->required();
    accuracy->add_option("--category", category, "one category id (default: all)");

    std::vector<std::string> models;
    bool narrow = false;
    auto* compare = app.add_subcommand("compare", "decision flips and monotonic trends across models");
    inputs.add_to(compare);
    compare->add_option("--models", models, "ordered model ids")->required()->delimiter(',');
    compare->add_flag("--top1", narrow, "also report flips that survive at top-1");

    double max_fraction = vl::kDefaultMaxExceptionFraction;
    auto* dph = app.add_subcommand("dph", "exception fraction vs rival rate scatter with trend lines");
    inputs.add_to(dph);
    dph->add_option("--models", models)->required()->delimiter(',');
    dph->add_option("--max-fraction", max_fraction, "keep criteria strictly below this fraction")
        ->check(CLI::Range(0.0, 1.0));
    dph->add_option("--out,-o", out, "scatter output (default stdout)");

    std::string format = "tsv";
    auto* report = app.add_subcommand("report", "assessment table");
    inputs.add_to(report);
    report->add_option("--model,--models", models, "model ids")->required()->delimiter(',');
    report->add_option("--format", format, "tsv | text | json");
    report->add_option("--out,-o", out, "table output (default stdout)");

    std::string printed;
    auto* regenerate = app.add_subcommand("regenerate", "recompute a printed results table from its percentages");
    regenerate->add_option("printed", printed, "printed table (TSV)")->required()->check(CLI::ExistingFile);
    regenerate->add_option("--out,-o", out, "discrepancy report (default stdout)");

    std::string image_root;
    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "curation endpoints for the tagging UI");
    serve->add_option("--manifest,-m", manifest_path)->required()->check(CLI::ExistingFile);
    serve->add_option("--port", port)->check(CLI::Range(0, 65535));
    serve->add_option("--host", host);
    serve->add_option("--image-root", image_root, std::string("image directory (default $") + vl::kImageRootEnv + ")");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage_error", e.what());
        std::cerr << app.help();
        return 2;
    }

    try {
        if (*validate) return run_validate(manifest_path);
        if (*ingest) return run_ingest(ingest_logs, out);
        if (*assess) return run_assess(inputs, model, criterion, json);
        if (*accuracy) return run_accuracy(inputs, model, category);
        if (*compare) return run_compare(inputs, models, narrow);
        if (*dph) return run_dph(inputs, models, max_fraction, out);
        if (*report) return run_report(inputs, models, format, out);
        if (*regenerate) return run_regenerate(printed, out);
        if (*serve) return run_serve(manifest_path, image_root, host, port);
    } catch (const vl::Error& e) {
        print_error(e.code(), e.what(), e.details());
        return 1;
    } catch (const std::exception& e) {
        print_error("internal_error", e.what());
        return 1;
    }
    return 2;
}
