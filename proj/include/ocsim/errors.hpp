#pragma once

#include <stdexcept>
#include <string>

namespace ocsim {

// Base class for every error the simulator throws on purpose.
class SimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numeric argument is outside its documented domain.
class InvalidParameter : public SimError {
public:
    using SimError::SimError;
};

// Array/matrix dimensions do not line up.
class ShapeError : public SimError {
public:
    using SimError::SimError;
};

// Bad or inconsistent configuration input (files, scenarios, device specs).
class ConfigError : public SimError {
public:
    using SimError::SimError;
};

// A resource pool cannot cover a request; carries how many units are missing.
class CapacityError : public SimError {
public:
    CapacityError(const std::string& what, int shortfall)
        : SimError(what), shortfall_(shortfall) {}
    int shortfall() const { return shortfall_; }

private:
    int shortfall_ = 0;
};

// Calibration failed to converge; carries the residual it got stuck at.
class CalibrationError : public SimError {
public:
    CalibrationError(const std::string& what, double residual)
        : SimError(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_ = 0.0;
};

} // namespace ocsim
