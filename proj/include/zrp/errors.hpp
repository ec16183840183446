#ifndef ZRP_ERRORS_HPP
#define ZRP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace zrp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid model input (bad rate table, wrong particle count, bad matrix...).
struct InvalidArgument : Error {
  using Error::Error;
};

/// Query beyond the validated horizon of a tabulated rate function.
struct HorizonError : Error {
  using Error::Error;
};

/// |Omega| or a similar resource cap was exceeded.
struct CapExceeded : Error {
  using Error::Error;
};

/// An exponent would overflow; reported instead of returning inf.
struct SaturationError : Error {
  using Error::Error;
};

/// Eigensolver / bisection / other numerical machinery failed.
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace zrp

#endif
