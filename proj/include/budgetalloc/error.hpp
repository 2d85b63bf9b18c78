#pragma once

#include <stdexcept>
#include <string>

namespace budgetalloc {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset / input errors.
struct MissingColumn : Error {
  using Error::Error;
};
struct ParseFailure : Error {
  using Error::Error;
};
struct NonBinaryResponse : Error {
  using Error::Error;
};
struct NegativeCost : Error {
  using Error::Error;
};
struct TreatmentOutOfRange : Error {
  using Error::Error;
};
struct EmptyDataset : Error {
  using Error::Error;
};
struct ZeroFeatureDim : Error {
  using Error::Error;
};
struct InvalidK : Error {
  using Error::Error;
};

// Allocation / Q-evaluation errors.
struct NegativeAlpha : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct InstanceTooLarge : Error {
  using Error::Error;
};
struct Infeasible : Error {
  using Error::Error;
};
struct InfeasibleBudget : Error {
  using Error::Error;
};

// Gradient estimation errors.
struct InvalidParams : Error {
  using Error::Error;
};
struct ZeroVector : Error {
  using Error::Error;
};

// Model errors.
struct NonFiniteActivation : Error {
  using Error::Error;
};

// Metric errors.
struct NotTwoTreatments : Error {
  using Error::Error;
};
struct DegenerateCurve : Error {
  using Error::Error;
};

// Configuration / CLI errors.
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace budgetalloc
