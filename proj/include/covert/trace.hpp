#pragma once

#include <cstddef>
#include <limits>

namespace covert {

/// One row of a solver's iteration log. Fields a solver does not track are NaN.
struct TracePoint {
  std::size_t iteration = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double bound = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace covert
