#pragma once

#include <stdexcept>
#include <string>

namespace sesa {

/// Malformed or inconsistent input: files, headers, labels, specs, flags.
/// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure (non-PD matrix after ridge retry, non-finite loss).
/// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Broken internal invariant, e.g. an EM log-likelihood decrease.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace sesa
