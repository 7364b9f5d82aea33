#pragma once

#include <stdexcept>

namespace fuselite {

// Error classes map 1:1 onto CLI exit codes (see tools/): io/format -> 2,
// shape -> 3, argument -> 4, dataset -> 6. Keep the hierarchy flat.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct shape_error : error {
    using error::error;
};

struct argument_error : error {
    using error::error;
};

struct io_error : error {
    using error::error;
};

struct format_error : error {
    using error::error;
};

struct dataset_error : error {
    using error::error;
};

struct tape_error : error {
    using error::error;
};

}  // namespace fuselite
