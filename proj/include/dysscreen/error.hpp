#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dysscreen {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (wrong arity, bad fragment length...).
class ContractViolation : public Error {
public:
  using Error::Error;
};

class DecodeError : public Error {
public:
  DecodeError(std::string document, const std::string& what)
      : Error("cannot decode document '" + document + "': " + what), document_(std::move(document)) {}
  const std::string& document() const noexcept { return document_; }

private:
  std::string document_;
};

// Input data failed validation; details() lists every offending item.
class ValidationError : public Error {
public:
  explicit ValidationError(std::vector<std::string> details)
      : Error(join(details)), details_(std::move(details)) {}
  const std::vector<std::string>& details() const noexcept { return details_; }

private:
  static std::string join(const std::vector<std::string>& d) {
    std::string out;
    for (const auto& s : d) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> details_;
};

// Sampling or selection ran out of candidates.
class ExhaustionError : public Error {
public:
  ExhaustionError(const std::string& what, std::size_t found) : Error(what), found_(found) {}
  std::size_t found() const noexcept { return found_; }

private:
  std::size_t found_;
};

class UnsupportedAgeError : public Error {
public:
  using Error::Error;
};

// Training data cannot support the requested model (e.g. single class).
class DegenerateDataError : public Error {
public:
  using Error::Error;
};

// Feature schema or arity mismatch between data and a model.
class SchemaError : public Error {
public:
  using Error::Error;
};

class StratificationError : public Error {
public:
  using Error::Error;
};

}  // namespace dysscreen
