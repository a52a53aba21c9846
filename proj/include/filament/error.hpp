#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace filament {

/// Malformed or unreadable input (files, flags, request bodies).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter or data invariant does not hold.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A token surface or id that does not exist in the dataset.
class UnknownTokenError : public std::runtime_error {
 public:
  UnknownTokenError(const std::string& what, std::vector<std::string> suggestions = {})
      : std::runtime_error(what), suggestions_(std::move(suggestions)) {}

  const std::vector<std::string>& suggestions() const { return suggestions_; }

 private:
  std::vector<std::string> suggestions_;
};

}  // namespace filament
