#pragma once

#include <stdexcept>
#include <string>

namespace epm {

// Malformed or out-of-contract input.
class invalid_input : public std::invalid_argument {
 public:
  explicit invalid_input(const std::string& what) : std::invalid_argument(what) {}
};

// exp map produced a warp SRVF with a negative sample.
class orthant_violation : public std::domain_error {
 public:
  explicit orthant_violation(const std::string& what) : std::domain_error(what) {}
};

// Warp SRVF vanishes somewhere, so the warp has no inverse at grid resolution.
class non_invertible : public std::domain_error {
 public:
  explicit non_invertible(const std::string& what) : std::domain_error(what) {}
};

// Input is valid but carries no information (e.g. an all-zero dissimilarity matrix).
class degenerate_input : public std::domain_error {
 public:
  explicit degenerate_input(const std::string& what) : std::domain_error(what) {}
};

}  // namespace epm
