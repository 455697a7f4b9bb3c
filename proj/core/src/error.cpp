#include "scflow/error.hpp"

namespace scflow {

FormatError::FormatError(std::string field, const std::string& detail)
    : Error("format error in " + field + ": " + detail), field_(std::move(field)) {}

}  // namespace scflow
