#pragma once

#include <stdexcept>
#include <string>

namespace hc1 {

enum class ErrorKind { invalid_argument, config, resource, convergence, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorKind::invalid_argument, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(what);
}

}  // namespace hc1
