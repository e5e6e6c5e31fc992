#pragma once

#include <stdexcept>
#include <string>

namespace esave {

// Error taxonomy shared by the library and the CLI. Exit codes:
// usage = 1, data = 2, model = 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual int exit_code() const noexcept { return 2; }
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error(msg) {}
    int exit_code() const noexcept override { return 1; }
};

class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
    int exit_code() const noexcept override { return 2; }
};

// Data error carrying a 1-based row number of the offending CSV line.
class ParseError : public DataError {
public:
    ParseError(const std::string& msg, std::size_t row)
        : DataError("row " + std::to_string(row) + ": " + msg), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class ModelError : public Error {
public:
    explicit ModelError(const std::string& msg) : Error(msg) {}
    int exit_code() const noexcept override { return 3; }
};

}  // namespace esave
