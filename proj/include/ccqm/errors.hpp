#pragma once

#include <stdexcept>
#include <string>

namespace ccqm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid lattice, Hamiltonian or run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Arithmetic failure during propagation or collapse.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A collapse or hit was requested where the wavefunction vanishes.
class ZeroSupportError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Antisymmetrization produced an identically zero jump factor.
class DegenerateJumpError : public NumericError {
public:
    using NumericError::NumericError;
};

/// The particle has no momentum content, so no de Broglie length exists.
class DegenerateMomentumError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Symmetrizing a merge annihilated the product (Pauli exclusion).
class MergeAborted : public Error {
public:
    using Error::Error;
};

} // namespace ccqm
