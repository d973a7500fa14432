#include <pybind11/pybind11.h>

#include "rmpc/types.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_core, m) {
  m.doc() = "placeholder";
  m.attr("__version__") = rmpc::kVersion;
}
