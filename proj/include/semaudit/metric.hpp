#pragma once

#include <optional>
#include <string>
#include <utility>

namespace semaudit {

/// A scalar that may be undefined, in which case `reason` says why.
struct MetricValue {
    std::optional<double> value;
    std::string reason;

    static MetricValue of(double v) { return {v, {}}; }
    static MetricValue undefined(std::string why) { return {std::nullopt, std::move(why)}; }

    bool defined() const { return value.has_value(); }
    double operator*() const { return *value; }
};

} // namespace semaudit
