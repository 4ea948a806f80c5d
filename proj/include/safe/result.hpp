#pragma once

#include <string>
#include <utility>
#include <variant>

namespace safe {

// Structured failure: a stable machine-readable code plus a human detail.
// Codes are part of the wire contract (they map onto HTTP statuses and CLI
// exit codes), so spellings must not drift.
struct Error {
  std::string code;
  std::string detail;
};

template <typename T>
class Result {
 public:
  Result(T value) : value_(std::move(value)) {}
  Result(Error err) : value_(std::move(err)) {}

  static Result failure(std::string code, std::string detail = "") {
    return Result(Error{std::move(code), std::move(detail)});
  }

  bool ok() const { return std::holds_alternative<T>(value_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& { return std::get<T>(value_); }
  T& value() & { return std::get<T>(value_); }
  T&& value() && { return std::get<T>(std::move(value_)); }

  const Error& error() const { return std::get<Error>(value_); }

 private:
  std::variant<T, Error> value_;
};

// Result for operations that return nothing on success.
class Status {
 public:
  Status() = default;
  Status(Error err) : err_(std::move(err)), failed_(true) {}

  static Status success() { return Status(); }
  static Status failure(std::string code, std::string detail = "") {
    return Status(Error{std::move(code), std::move(detail)});
  }

  bool ok() const { return !failed_; }
  explicit operator bool() const { return ok(); }
  const Error& error() const { return err_; }

 private:
  Error err_;
  bool failed_ = false;
};

}  // namespace safe
