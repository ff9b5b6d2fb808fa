#pragma once

#include <stdexcept>
#include <string>

namespace qcdnet {

/// Invalid parameters passed to a model constructor or operation.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A posterior or queue quantity fell outside the region reachable from a
/// valid initial state.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Queue bookkeeping disagrees with the buffer contents or with the
/// conservation identity linking sensor and sequencer backlogs.
class StateCorruption : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A slot outcome handed to the posterior recursion does not belong to the
/// queue state it is applied to.
class OutcomeMismatch : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Sampling rate too high for the success rate: N / period >= sigma.
class StabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An episode ran past its slot cap without stopping.
class HorizonExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Value iteration residual stalled above the requested tolerance.
class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scenario file could not be parsed or holds an invalid field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace qcdnet
