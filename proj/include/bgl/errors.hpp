#ifndef BGL_ERRORS_HPP
#define BGL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bgl {

/// Argument outside an operation's mathematical domain.
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative method hit its iteration cap or lost its bracket.
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A log-density term evaluated to NaN or +inf.
class overflow_error : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

/// A numerical integral over an unbounded range did not settle.
class divergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configured column name is not present in the input header.
class mapping_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cleaning or slicing left no observations.
class empty_result_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Statistic undefined for the input (e.g. zero variance).
class degenerate_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bgl

#endif
