#pragma once

#include <stdexcept>
#include <string>

namespace metahom {

// Failure categories. The CLI maps these onto its exit codes.
enum class ErrorCode {
  config,             // malformed or invalid configuration
  no_convergence,     // iterative solver hit its iteration cap
  incompatible_rhs,   // CG found zero curvature with a residual above tolerance
  resolution,         // grid too coarse for the requested geometry
  dimension_mismatch, // field size does not match the grid
  pole_proximity,     // lossless frequency sits on a resonance
  no_admissible_loop, // every candidate circulation loop meets the resonator
  unsupported,        // request outside what the routine handles
  io,                 // file read/write failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

const char* to_string(ErrorCode code);

}  // namespace metahom
