#pragma once

#include <stdexcept>
#include <string>

namespace voicescreen {

// Base for everything thrown out of the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent inputs: files, manifests, shapes, categories.
class DataError : public Error {
public:
    using Error::Error;
};

// Numeric breakdown during training (non-finite loss and friends).
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace voicescreen
