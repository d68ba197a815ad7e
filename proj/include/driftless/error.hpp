#pragma once

#include <stdexcept>
#include <string>

namespace driftless {

enum class ErrorKind {
    GridDomain,
    InvalidSurface,
    Arbitrage,
    Singular,
    Fit,
    Simulation,
    Shape,
    Domain,
    Training,
    Construction,
    Tilt,
    Validation,
    Io,
};

const char* to_string(ErrorKind kind) noexcept;

// Validation and I/O problems are caller errors; everything else is numerical.
inline bool is_numerical(ErrorKind kind) noexcept {
    return kind != ErrorKind::Validation && kind != ErrorKind::Io && kind != ErrorKind::Shape;
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace driftless
