#pragma once

#include <stdexcept>
#include <string>

namespace fsvd {

// Invalid or inconsistent input data (bad grids, dimension mismatches,
// unparsable files). CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failure of a numerical procedure (non-PSD matrix, exhausted constraints,
// diverged search). CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fsvd
