// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 ValuLens Contributors

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace valulens {

/// Base error. `code` is a stable machine-readable identifier, `details`
/// carries one entry per offending item (path, image id, line number...).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message, std::vector<std::string> details = {})
        : std::runtime_error(message), code_(std::move(code)), details_(std::move(details)) {}

    const std::string& code() const noexcept { return code_; }
    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    std::string code_;
    std::vector<std::string> details_;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& message, std::vector<std::string> details = {})
        : Error("parse_error", message, std::move(details)) {}
};

/// Every violated invariant is listed in details(), one "path: problem" per entry.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error("validation_error",
                std::to_string(violations.size()) + " invariant violation(s)",
                std::move(violations)) {}
};

class IngestError : public Error {
public:
    explicit IngestError(std::vector<std::string> problems)
        : Error("ingest_error", std::to_string(problems.size()) + " rejected record(s)",
                std::move(problems)) {}
};

/// Raised when prediction records needed for an evaluation are absent.
/// details() lists the missing image ids.
class CoverageError : public Error {
public:
    CoverageError(const std::string& message, std::vector<std::string> missing)
        : Error("coverage_error", message, std::move(missing)) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& message) : Error("domain_error", message) {}
};

}  // namespace valulens
