#pragma once

#include <stdexcept>
#include <string>

namespace chantwin {

// Malformed input file (bad JSON, wrong types, unknown keys).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SceneTooLargeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Calibration bounds or split sizes that cannot be satisfied.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace chantwin
