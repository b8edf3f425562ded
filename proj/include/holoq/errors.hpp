// errors.hpp: exception types thrown by the holoq library

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace holoq {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct dimension_error : error {
    using error::error;
};

struct hermiticity_error : error {
    using error::error;
};

// Bi-orthonormality could not be reached; carries what was achieved.
struct ill_conditioned_error : error {
    double residual;
    ill_conditioned_error(const std::string& what, double r) : error(what), residual(r) {}
};

struct non_convergence_error : error {
    using error::error;
};

struct structure_change_error : error {
    double s;
    structure_change_error(const std::string& what, double s_) : error(what), s(s_) {}
};

struct matching_ambiguity_error : error {
    double s;
    matching_ambiguity_error(const std::string& what, double s_) : error(what), s(s_) {}
};

struct degeneracy_error : error {
    using error::error;
};

struct not_degenerate_error : error {
    using error::error;
};

// Grid too coarse; suggested_n is a grid size that should work.
struct resolution_error : error {
    std::size_t suggested_n;
    resolution_error(const std::string& what, std::size_t n) : error(what), suggested_n(n) {}
};

struct stability_error : error {
    std::size_t suggested_steps;
    stability_error(const std::string& what, std::size_t n) : error(what), suggested_steps(n) {}
};

struct singular_gauge_error : error {
    using error::error;
};

struct gap_collapse_error : error {
    using error::error;
};

struct path_error : error {
    using error::error;
};

struct model_error : error {
    using error::error;
};

// Invalid experiment configuration, from a file or a --set override.
struct config_error : error {
    using error::error;
};

} // namespace holoq
