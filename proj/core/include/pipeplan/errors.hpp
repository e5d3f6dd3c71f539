#ifndef PIPEPLAN_ERRORS_HPP
#define PIPEPLAN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pipeplan {

// Malformed input text (JSON syntax, missing or unknown fields, bad types).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally well-formed input that violates a domain rule (cycles,
// dangling edges, shape mismatches, empty regions, bad argument ranges).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Instance exceeds a guard rail of an exhaustive search.
class TooLargeError : public std::runtime_error {
public:
    explicit TooLargeError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace pipeplan

#endif
