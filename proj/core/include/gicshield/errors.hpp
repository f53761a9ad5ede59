#pragma once

#include <stdexcept>
#include <string>

namespace gicshield {

/// Malformed input file (bad syntax, wrong types, missing sections).
class ParseError : public std::runtime_error {
public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally well-formed input that violates a model invariant
/// (dangling id, negative conductance, missing winding mapping, ...).
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure that cannot be reported as a degraded status
/// (floating DC network, non-finite constraint callback, ...).
class SolveError : public std::runtime_error {
public:
  explicit SolveError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace gicshield
