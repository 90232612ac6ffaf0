#pragma once

#include <stdexcept>
#include <string>

namespace terradeep {

// Broad classes of failure. The C API and the CLI map these onto status
// and exit codes, so every thrown error carries one.
enum class ErrorKind {
  shape,      // incompatible tensor / image / vector dimensions
  parameter,  // invalid configuration value
  dataset,    // dataset contents violate a precondition
  format,     // malformed file
  outlier,    // value outside its physical range
  label,      // class label outside [0, k)
  catalog,    // unknown zoo entry
  state,      // stale or inconsistent internal state
  internal,   // violated invariant
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define TERRADEEP_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& message) : Error(ErrorKind::Kind, message) {} \
  };

TERRADEEP_DEFINE_ERROR(ShapeError, shape)
TERRADEEP_DEFINE_ERROR(ParameterError, parameter)
TERRADEEP_DEFINE_ERROR(DatasetError, dataset)
TERRADEEP_DEFINE_ERROR(FormatError, format)
TERRADEEP_DEFINE_ERROR(OutlierError, outlier)
TERRADEEP_DEFINE_ERROR(LabelError, label)
TERRADEEP_DEFINE_ERROR(CatalogError, catalog)
TERRADEEP_DEFINE_ERROR(StateError, state)
TERRADEEP_DEFINE_ERROR(InternalError, internal)

#undef TERRADEEP_DEFINE_ERROR

}  // namespace terradeep
