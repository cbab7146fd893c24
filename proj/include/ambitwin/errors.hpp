#pragma once

#include <stdexcept>
#include <string>

namespace ambitwin {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration (layer sizes, schedules, codecs, run configs).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A caller broke a precondition, e.g. an input of the wrong width.
class ContractError : public Error {
public:
  using Error::Error;
};

/// Non-finite activations or gradients during training.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Malformed or inconsistent model / dataset file.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Rejection sampler could not produce the requested events.
class GenerationError : public Error {
public:
  using Error::Error;
};

/// Index sampler cannot be built (e.g. an empty class).
class SamplerError : public Error {
public:
  using Error::Error;
};

/// A statistic is undefined for the given input (zero variance, too few values).
class StatisticError : public Error {
public:
  using Error::Error;
};

} // namespace ambitwin
