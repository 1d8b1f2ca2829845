#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace isarxai {

using cd = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s, exact by SI definition
inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Caller passed a value that violates a documented precondition.
struct ParameterError : std::invalid_argument {
    explicit ParameterError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A config file or derived experiment setup is inconsistent (not a single bad argument).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// An iterative routine failed to converge or produced non-finite values.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// File missing, unreadable, or failed its magic/size validation.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require_param(bool ok, const std::string& msg) {
    if (!ok) throw ParameterError(msg);
}

inline double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
inline double rad_to_deg(double rad) { return rad * (180.0 / kPi); }

}  // namespace isarxai
