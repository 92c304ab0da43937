#pragma once

#include <stdexcept>
#include <string>

namespace homrf {

enum class ErrorKind {
  invalid_input,          // bad arguments, out-of-range labels, dimension mismatches
  capacity,               // enumeration/materialization caps exceeded
  parse,                  // model/labeling file syntax
  invalid_decomposition,  // subgraph structure violations
  unsupported,            // operation not available for this decomposition
  numerical,              // underflow/overflow/non-finite aborts
  line_search_failure,    // backtracking exhausted
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace homrf
