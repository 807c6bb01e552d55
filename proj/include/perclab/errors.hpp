#pragma once

#include <stdexcept>
#include <string>

namespace perclab {

// Instance would exceed a configured resource cap.
struct ResourceError : std::runtime_error {
    explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

// The sampled window does not cover what an event evaluation needs.
struct WindowError : std::runtime_error {
    explicit WindowError(const std::string& what) : std::runtime_error(what) {}
};

// An estimator was handed data it cannot work with (too few positive rows,
// too much censoring, no scale pair, ...).
struct EstimationError : std::runtime_error {
    explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace perclab
