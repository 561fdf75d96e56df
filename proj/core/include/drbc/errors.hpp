#pragma once

#include <stdexcept>

namespace drbc {

// Malformed or insufficient input data (prices, CSV files).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical procedure could not produce a trustworthy answer.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace drbc
