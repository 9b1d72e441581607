#pragma once

#include <stdexcept>
#include <string>

namespace kafmm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularEvaluation : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct ParameterError : Error { using Error::Error; };
struct CompositionError : Error { using Error::Error; };
struct RegistryError : Error { using Error::Error; };
struct InputError : Error { using Error::Error; };
struct OperatorConstructionError : Error { using Error::Error; };
struct MetricError : Error { using Error::Error; };

}  // namespace kafmm
