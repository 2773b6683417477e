#ifndef APIUSAGE_ERROR_HPP
#define APIUSAGE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace apiusage {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: malformed IR, corrupt corpus or model files, unknown keys.
class InputError : public Error {
public:
    using Error::Error;
};

class IoError : public InputError {
public:
    using InputError::InputError;
};

class ParseError : public InputError {
public:
    ParseError(const std::string& message, std::size_t line, std::size_t column)
        : InputError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                     message),
          message_(message),
          line_(line),
          column_(column) {}

    const std::string& message() const noexcept { return message_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::string message_;
    std::size_t line_;
    std::size_t column_;
};

/// A path through a method that the usage-graph builder cannot interpret,
/// e.g. a move-result that does not follow an invoke.
class MalformedPathError : public Error {
public:
    using Error::Error;
};

/// Raised when a method has more branch points than the configured cap.
/// Callers treat it as an exclusion, not a failure.
class BranchCapExceeded : public Error {
public:
    BranchCapExceeded(std::size_t branches, std::size_t cap)
        : Error("method has " + std::to_string(branches) + " branch nodes (cap " +
                std::to_string(cap) + ")"),
          branches_(branches) {}

    std::size_t branches() const noexcept { return branches_; }

private:
    std::size_t branches_;
};

class OutOfVocabularyError : public Error {
public:
    explicit OutOfVocabularyError(const std::string& symbol)
        : Error("method not in model vocabulary: " + symbol), symbol_(symbol) {}

    const std::string& symbol() const noexcept { return symbol_; }

private:
    std::string symbol_;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace apiusage

#endif  // APIUSAGE_ERROR_HPP
