#include <pybind11/pybind11.h>

PYBIND11_MODULE(_rfm, m) { m.doc() = "riemannian flow matching core (placeholder)"; }
