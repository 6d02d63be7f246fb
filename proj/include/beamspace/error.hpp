// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace beamspace {

// Input that violates a documented precondition or file schema.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what, std::string field = {})
        : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

    // Name of the offending field, if the error came from a structured input.
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// A numerical procedure could not produce a trustworthy result
// (singular system, non-convergent search, non-finite data).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message, const std::string& field = {}) {
    if (!condition) throw ValidationError(message, field);
}

} // namespace detail
} // namespace beamspace
