#pragma once

#include <stdexcept>
#include <string>

namespace sgc {

/// Base class for every error raised by the simulator.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The particle sits outside every branch with nonzero weight.
class NoSupport : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Integration step too coarse to resolve the overlap region.
class StepTooLarge : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Operation received a wave with the wrong number of branches.
class BranchCount : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Particle is already past a device plane, or never reaches it.
class GeometryError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

class AxisClash : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

class UnsupportedAxis : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Malformed scenario document.
class ParseError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Well-formed input that violates a model constraint.
class ValidationError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

}  // namespace sgc
