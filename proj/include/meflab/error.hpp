#pragma once

#include <stdexcept>
#include <string>

namespace meflab {

// All library failures surface as this type with a human-readable message
// naming the offending component (layer, file, config key, ...).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

}  // namespace meflab
