#pragma once

#include <stdexcept>
#include <string>

namespace kmemir {

enum class ErrorKind {
  usage,    // invalid configuration or arguments
  parse,    // malformed input file
  numeric,  // solver or training failure
  io,       // file system failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Same error with a context label prepended, e.g. "fold 3: ...".
  Error with_context(const std::string& context) const {
    return Error(kind_, context + ": " + what());
  }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return {ErrorKind::usage, what}; }
inline Error parse_error(const std::string& what) { return {ErrorKind::parse, what}; }
inline Error numeric_error(const std::string& what) { return {ErrorKind::numeric, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::io, what}; }

// Runs fn and re-throws any kmemir::Error with a context label attached.
template <typename Fn>
decltype(auto) with_context(const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw e.with_context(context);
  }
}

}  // namespace kmemir
