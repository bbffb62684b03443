#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qproxy {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or invalid instance data. `line` is 0 when not tied to a source line.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::size_t line = 0)
      : Error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Constraint set is empty; `letters` are the offending source letters.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::vector<std::size_t> letters)
      : Error(what), letters_(std::move(letters)) {}
  const std::vector<std::size_t>& letters() const { return letters_; }

 private:
  std::vector<std::size_t> letters_;
};

class ZeroBallMass : public Error {
 public:
  explicit ZeroBallMass(std::size_t x)
      : Error("reproduction distribution puts zero mass on the ball of source letter " +
              std::to_string(x)),
        letter(x) {}
  std::size_t letter;
};

class ZeroComplementMass : public Error {
 public:
  explicit ZeroComplementMass(std::size_t x)
      : Error("reproduction distribution puts zero mass outside the ball of source letter " +
              std::to_string(x)),
        letter(x) {}
  std::size_t letter;
};

class DminViolation : public Error {
 public:
  using Error::Error;
};

class SearchTooLarge : public Error {
 public:
  using Error::Error;
};

class InfeasibleBudget : public Error {
 public:
  using Error::Error;
};

class CodebookExhausted : public Error {
 public:
  using Error::Error;
};

}  // namespace qproxy
