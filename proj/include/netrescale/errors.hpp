#pragma once

#include <stdexcept>
#include <string>

namespace netrescale {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A sliding window does not fit inside its (padded) input.
class InvalidGeometry : public Error {
public:
    using Error::Error;
};

// The network does not have the layer layout an operation needs
// (e.g. a second conv layer, or a dense head of two layers).
class StructureMismatch : public Error {
public:
    using Error::Error;
};

// Malformed document or a network that fails validation.
class ParseError : public Error {
public:
    using Error::Error;
};

class ArithmeticOverflow : public Error {
public:
    using Error::Error;
};

class EmptyCandidateList : public Error {
public:
    using Error::Error;
};

} // namespace netrescale
