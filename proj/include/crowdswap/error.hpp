#pragma once

#include <stdexcept>
#include <string>

namespace crowdswap {

/// Root of all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CROWDSWAP_ERROR(Name)                  \
    class Name : public Error {                \
    public:                                    \
        using Error::Error;                    \
    }

CROWDSWAP_ERROR(NonStochasticMatrix);
CROWDSWAP_ERROR(DegenerateBBox);
CROWDSWAP_ERROR(OutOfArea);
CROWDSWAP_ERROR(EmptyFile);
CROWDSWAP_ERROR(AreaTooSmall);
CROWDSWAP_ERROR(DoubleResolution);
CROWDSWAP_ERROR(UnknownKey);
CROWDSWAP_ERROR(Unsupported);
CROWDSWAP_ERROR(MissingOutcome);
CROWDSWAP_ERROR(InvalidArgument);

#undef CROWDSWAP_ERROR

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Scenario configuration rejected before a run starts.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what, int line = -1)
        : Error(format(field, what, line)), field_(field), reason_(what), line_(line) {}
    const std::string& field() const noexcept { return field_; }
    const std::string& reason() const noexcept { return reason_; }
    int line() const noexcept { return line_; }

private:
    static std::string format(const std::string& field, const std::string& what, int line) {
        std::string s = "config error";
        if (line >= 0)
            s += " at line " + std::to_string(line);
        if (!field.empty())
            s += " in field '" + field + "'";
        return s + ": " + what;
    }
    std::string field_;
    std::string reason_;
    int line_;
};

} // namespace crowdswap
