#pragma once

#include <stdexcept>
#include <string>

namespace cftim {

enum class ErrorKind {
    ParseError,
    MissingField,
    NonPositiveDuration,
    ChannelCountTooSmall,
    NoCoordinator,
    NonStochasticInput,
    DistanceBelowReference,
    NegativeMu,
    SchedulingInPast,
    DegenerateScenario,
    OutputExists,
    InvalidValue,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::MissingField: return "MissingField";
        case ErrorKind::NonPositiveDuration: return "NonPositiveDuration";
        case ErrorKind::ChannelCountTooSmall: return "ChannelCountTooSmall";
        case ErrorKind::NoCoordinator: return "NoCoordinator";
        case ErrorKind::NonStochasticInput: return "NonStochasticInput";
        case ErrorKind::DistanceBelowReference: return "DistanceBelowReference";
        case ErrorKind::NegativeMu: return "NegativeMu";
        case ErrorKind::SchedulingInPast: return "SchedulingInPast";
        case ErrorKind::DegenerateScenario: return "DegenerateScenario";
        case ErrorKind::OutputExists: return "OutputExists";
        case ErrorKind::InvalidValue: return "InvalidValue";
    }
    return "UnknownError";
}

/// Structured rejection: carries the error category and, where meaningful,
/// the offending field/key so callers can report it precisely.
class SimError : public std::runtime_error {
public:
    SimError(ErrorKind kind, std::string field, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) +
                             (field.empty() ? "" : " [" + field + "]") + ": " + message),
          kind_(kind),
          field_(std::move(field)) {}

    SimError(ErrorKind kind, const std::string& message) : SimError(kind, "", message) {}

    ErrorKind kind() const { return kind_; }
    const std::string& field() const { return field_; }

private:
    ErrorKind kind_;
    std::string field_;
};

}  // namespace cftim
