#ifndef CSFOREST_ERROR_HPP
#define CSFOREST_ERROR_HPP

#include <stdexcept>
#include <string>

namespace csforest {

// Base for all library errors. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration, unknown method name, invalid parameter value.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or insufficient input data.
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : DataError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace csforest

#endif // CSFOREST_ERROR_HPP
