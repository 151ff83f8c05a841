#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace polydedup {

// Coarse classification used by the CLI to pick an exit status.
enum class ErrorCategory { Config, Data, Backend, Internal };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what)
        : Error(ErrorCategory::Config, "config error: " + what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class BackendError : public Error {
public:
    explicit BackendError(const std::string& what) : Error(ErrorCategory::Backend, what) {}
};

// ---- corpus ---------------------------------------------------------------

class MalformedRecord : public DataError {
public:
    MalformedRecord(std::size_t line, const std::string& detail)
        : DataError("malformed record at line " + std::to_string(line) + ": " + detail),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateId : public DataError {
public:
    explicit DuplicateId(std::string id)
        : DataError("duplicate posting id: " + id), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class MissingRequiredField : public DataError {
public:
    MissingRequiredField(std::string field, std::size_t line)
        : DataError("missing required field '" + field + "' at line " + std::to_string(line)),
          field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// ---- normalize ------------------------------------------------------------

class FingerprintCollision : public DataError {
public:
    FingerprintCollision(const std::string& a, const std::string& b)
        : DataError("fingerprint collision between '" + a + "' and '" + b + "'") {}
};

// ---- translate / embed backends -------------------------------------------

class BackendUnavailable : public BackendError {
public:
    explicit BackendUnavailable(const std::string& what)
        : BackendError("backend unavailable: " + what) {}
};

class RateLimited : public BackendError {
public:
    RateLimited(const std::string& what, double retry_after_seconds)
        : BackendError("rate limited: " + what), retry_after_(retry_after_seconds) {}
    double retry_after_seconds() const noexcept { return retry_after_; }

private:
    double retry_after_;
};

class InvalidLanguage : public ConfigError {
public:
    explicit InvalidLanguage(const std::string& code)
        : ConfigError("invalid language code '" + code + "'") {}
};

// ---- index ----------------------------------------------------------------

class DimensionMismatch : public DataError {
public:
    DimensionMismatch(std::size_t expected, std::size_t got)
        : DataError("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                    std::to_string(got)) {}
};

class EmptyInput : public DataError {
public:
    explicit EmptyInput(const std::string& what) : DataError("empty input: " + what) {}
};

class NlistExceedsPoints : public ConfigError {
public:
    NlistExceedsPoints(std::size_t nlist, std::size_t points)
        : ConfigError("nlist " + std::to_string(nlist) + " exceeds number of points " +
                      std::to_string(points)) {}
};

class IoError : public DataError {
public:
    explicit IoError(const std::string& what) : DataError("i/o error: " + what) {}
};

class CorruptIndex : public DataError {
public:
    explicit CorruptIndex(const std::string& what) : DataError("corrupt index: " + what) {}
};

// ---- dedup / eval ---------------------------------------------------------

class NoMatchingRule : public ConfigError {
public:
    NoMatchingRule(const std::string& a, const std::string& b)
        : ConfigError("no expert rule matched pair (" + a + ", " + b +
                      "); ruleset lacks a terminal default") {}
};

class UnknownId : public DataError {
public:
    explicit UnknownId(const std::string& id) : DataError("unknown posting id: " + id) {}
};

class DuplicatePrediction : public DataError {
public:
    DuplicatePrediction(const std::string& a, const std::string& b)
        : DataError("pair (" + a + ", " + b + ") predicted more than once") {}
};

}  // namespace polydedup
