// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 ValuLens Contributors
//
// Manifest-curation endpoints backing the tagging UI. Transport-free: the
// CLI binds handle() to an HTTP server, tests call it directly.
//
//   GET /categories                   GET /categories/{id}
//   GET /criteria/{id}                GET /progress/{criterion_id}
//   PUT /criteria/{id}/exceptions     PUT /criteria/{id}/rivals
//   GET /images/{id}

#pragma once

#include <cctype>
#include <filesystem>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "valulens/corpus.hpp"
#include "valulens/error.hpp"

namespace valulens {

inline constexpr const char* kImageRootEnv = "VALULENS_IMAGE_ROOT";

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

inline HttpResponse json_response(int status, const nlohmann::ordered_json& body) {
    return {status, "application/json", body.dump(2) + "\n"};
}

inline nlohmann::ordered_json error_body(std::string_view code, std::string_view message,
                                         const std::vector<std::string>& details = {}) {
    nlohmann::ordered_json j;
    j["error"] = {{"code", code}, {"message", message}, {"details", details}};
    return j;
}

inline std::string_view image_content_type(const std::filesystem::path& file) {
    auto ext = file.extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".png") return "image/png";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    if (ext == ".bmp") return "image/bmp";
    return "application/octet-stream";
}

class CurationService {
public:
    CurationService(std::filesystem::path manifest_path,
                    std::optional<std::filesystem::path> image_root = std::nullopt)
        : manifest_path_(std::move(manifest_path)),
          image_root_(std::move(image_root)),
          corpus_(load_manifest(manifest_path_)) {}

    Corpus snapshot() const {
        std::shared_lock lock(mutex_);
        return corpus_;
    }

    HttpResponse handle(std::string_view method, std::string_view path, std::string_view body) {
        try {
            return route(method, split_path(path), body);
        } catch (const ValidationError& e) {
            return json_response(422, error_body(e.code(), e.what(), e.details()));
        } catch (const Error& e) {
            return json_response(400, error_body(e.code(), e.what(), e.details()));
        }
    }

private:
    static std::vector<std::string> split_path(std::string_view path) {
        std::vector<std::string> parts;
        std::size_t i = 0;
        while (i < path.size()) {
            if (path[i] == '/') {
                ++i;
                continue;
            }
            auto j = path.find('/', i);
            if (j == std::string_view::npos) j = path.size();
            parts.emplace_back(path.substr(i, j - i));
            i = j;
        }
        return parts;
    }

    static HttpResponse not_found(std::string_view what) {
        return json_response(404, error_body("not_found", std::string(what) + " not found"));
    }

    HttpResponse route(std::string_view method, const std::vector<std::string>& p,
                       std::string_view body) {
        const bool get = method == "GET";
        const bool put = method == "PUT";
        if (p.size() == 1 && p[0] == "categories") {
            if (!get) return method_not_allowed();
            std::shared_lock lock(mutex_);
            auto out = nlohmann::ordered_json::array();
            for (const auto& c : corpus_.categories()) out.push_back(to_json(c));
            return json_response(200, out);
        }
        if (p.size() == 2 && p[0] == "categories") {
            if (!get) return method_not_allowed();
            std::shared_lock lock(mutex_);
            const auto* c = corpus_.find_category(p[1]);
            return c ? json_response(200, to_json(*c)) : not_found("category '" + p[1] + "'");
        }
        if (p.size() == 2 && p[0] == "criteria") {
            if (!get) return method_not_allowed();
            std::shared_lock lock(mutex_);
            const auto* c = corpus_.find_criterion(p[1]);
            return c ? json_response(200, to_json(*c)) : not_found("criterion '" + p[1] + "'");
        }
        if (p.size() == 3 && p[0] == "criteria" && (p[2] == "exceptions" || p[2] == "rivals")) {
            if (!put) return method_not_allowed();
            auto ids = parse_id_list(body);
            return p[2] == "exceptions" ? put_exceptions(p[1], std::move(ids))
                                        : put_rivals(p[1], std::move(ids));
        }
        if (p.size() == 2 && p[0] == "progress") {
            if (!get) return method_not_allowed();
            return progress(p[1]);
        }
        if (p.size() == 2 && p[0] == "images") {
            if (!get) return method_not_allowed();
            return image(p[1]);
        }
        return not_found("endpoint");
    }

    static HttpResponse method_not_allowed() {
        return json_response(405, error_body("method_not_allowed", "method not allowed"));
    }

    static std::vector<std::string> parse_id_list(std::string_view body) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("body is not JSON: ") + e.what());
        }
        if (!j.is_array()) throw ParseError("body must be a JSON array of image ids");
        std::vector<std::string> ids;
        for (const auto& e : j) {
            if (!e.is_string()) throw ParseError("body must be a JSON array of image ids");
            ids.push_back(e.get<std::string>());
        }
        return ids;
    }

    template <typename Mutate>
    HttpResponse update_criterion(const std::string& id, Mutate&& mutate) {
        std::unique_lock lock(mutex_);
        if (!corpus_.find_criterion(id)) return not_found("criterion '" + id + "'");
        auto categories = corpus_.categories();
        auto criteria = corpus_.criteria();
        RivalCriterion* target = nullptr;
        for (auto& c : criteria) {
            if (c.criterion_id == id) target = &c;
        }
        mutate(*target);
        auto next = Corpus::create(std::move(categories), std::move(criteria));
        save_manifest(next, manifest_path_);
        corpus_ = std::move(next);
        return json_response(200, to_json(corpus_.criterion(id)));
    }

    HttpResponse put_exceptions(const std::string& id, std::vector<std::string> ids) {
        return update_criterion(id, [&](RivalCriterion& c) {
            c.exception_count = static_cast<std::int64_t>(ids.size());
            c.exception_image_ids = std::move(ids);
        });
    }

    HttpResponse put_rivals(const std::string& id, std::vector<std::string> ids) {
        return update_criterion(id, [&](RivalCriterion& c) { c.rival_image_ids = std::move(ids); });
    }

    HttpResponse progress(const std::string& id) {
        std::shared_lock lock(mutex_);
        const auto* c = corpus_.find_criterion(id);
        if (!c) return not_found("criterion '" + id + "'");
        nlohmann::ordered_json j;
        j["criterion_id"] = c->criterion_id;
        j["tagged"] = c->exception_count;
        if (c->category_id) {
            j["total"] = corpus_.category(*c->category_id).training_set_size;
            j["exception_fraction"] = *corpus_.exception_fraction(*c);
        } else {
            j["total"] = 0;
            j["exception_fraction"] = nullptr;
        }
        return json_response(200, j);
    }

    HttpResponse image(const std::string& id) const {
        if (!image_root_) {
            return json_response(404, error_body("not_found", "no image root configured"));
        }
        if (id.empty() || id == "." || id == ".." || id.find('\\') != std::string::npos) {
            return json_response(400, error_body("bad_request", "invalid image id"));
        }
        namespace fs = std::filesystem;
        std::optional<fs::path> file;
        if (fs::is_regular_file(*image_root_ / id)) {
            file = *image_root_ / id;
        } else {
            for (const char* ext : {".jpg", ".jpeg", ".png", ".gif", ".webp", ".bmp"}) {
                auto candidate = *image_root_ / (id + ext);
                if (fs::is_regular_file(candidate)) {
                    file = candidate;
                    break;
                }
            }
        }
        if (!file) return not_found("image '" + id + "'");
        return {200, std::string(image_content_type(*file)), read_text_file(*file)};
    }

    std::filesystem::path manifest_path_;
    std::optional<std::filesystem::path> image_root_;
    mutable std::shared_mutex mutex_;
    Corpus corpus_;
};

}  // namespace valulens
