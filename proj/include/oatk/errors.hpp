#ifndef OATK_ERRORS_HPP
#define OATK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace oatk {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct NonFiniteError : Error {
    using Error::Error;
};

struct RankDeficientError : Error {
    using Error::Error;
};

struct SOutOfRangeError : Error {
    using Error::Error;
};

struct DegenerateDrawError : Error {
    using Error::Error;
};

struct FactorizationError : Error {
    using Error::Error;
};

struct LambdaMismatchError : Error {
    using Error::Error;
};

struct AllSkippedError : Error {
    using Error::Error;
};

struct GammaOutOfRangeError : Error {
    using Error::Error;
};

struct NegativeBudgetError : Error {
    using Error::Error;
};

struct SingularCovarianceError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// CSV/ingestion failure that can point at the offending cell.
struct ParseError : Error {
    long row = -1;
    long col = -1;
    ParseError(const std::string& msg, long r = -1, long c = -1)
        : Error(msg), row(r), col(c) {}
};

} // namespace oatk

#endif
