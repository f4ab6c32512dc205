#pragma once

#include <stdexcept>
#include <string>

namespace mgsim {

// Malformed or inconsistent input: topology files, scenario data, ranges.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public InputError {
public:
    using InputError::InputError;
};

class ValidationError : public InputError {
public:
    using InputError::InputError;
};

class RangeError : public InputError {
public:
    using InputError::InputError;
};

// Solver-side failures: singular matrices, Newton divergence, step underflow.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double last_residual)
        : NumericalError(what), last_residual_(last_residual) {}
    double last_residual() const { return last_residual_; }

private:
    double last_residual_;
};

class StepSizeError : public NumericalError {
public:
    StepSizeError(const std::string& what, double time)
        : NumericalError(what), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

}  // namespace mgsim
