#ifndef BFA_ERRORS_HPP
#define BFA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bfa {

// Bad arguments, dimension mismatches, malformed files.
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values produced during training or optimization.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Combinatorial guard of the enumeration oracle exceeded.
struct size_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File read/write failures.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace bfa

#endif
