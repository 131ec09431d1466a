#pragma once

#include <stdexcept>
#include <string>

namespace icascope {

// Base class for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error { using Error::Error; };
struct MontageError : Error { using Error::Error; };
struct FilterDesignError : Error { using Error::Error; };
struct WindowError : Error { using Error::Error; };
struct DegenerateInputError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct DegenerateComponentError : Error { using Error::Error; };
struct RangeError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct StateError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct RegistryError : Error { using Error::Error; };
struct CompatibilityError : Error { using Error::Error; };

}  // namespace icascope
