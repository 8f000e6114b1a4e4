#include "prbench/error.hpp"

namespace prb {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string out = "invalid configuration";
  for (const auto& issue : issues) out += "\n  " + issue;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

DataError::DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

}  // namespace prb
