#include "terradeep/error.hpp"

namespace terradeep {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape: return "shape error";
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::dataset: return "dataset error";
    case ErrorKind::format: return "format error";
    case ErrorKind::outlier: return "outlier error";
    case ErrorKind::label: return "label error";
    case ErrorKind::catalog: return "catalog error";
    case ErrorKind::state: return "state error";
    case ErrorKind::internal: return "internal error";
  }
  return "error";
}

}  // namespace terradeep
