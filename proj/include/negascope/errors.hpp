#pragma once

#include <stdexcept>
#include <string>

namespace negascope {

// Base of every error the library throws. `kind()` is a short stable tag used
// by the CLI for reporting and exit-code mapping.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define NEGASCOPE_ERROR(Name, tag)                                              \
    class Name : public Error {                                                 \
    public:                                                                     \
        explicit Name(const std::string& what) : Error(tag, what) {}            \
    };

NEGASCOPE_ERROR(ParseError, "parse")
NEGASCOPE_ERROR(IntegrityError, "integrity")
NEGASCOPE_ERROR(ShapeError, "shape")
NEGASCOPE_ERROR(RangeError, "range")
NEGASCOPE_ERROR(ArgumentError, "argument")
NEGASCOPE_ERROR(ConflictError, "conflict")
NEGASCOPE_ERROR(CacheMissError, "cache-miss")
NEGASCOPE_ERROR(CapacityError, "capacity")
NEGASCOPE_ERROR(EmptyInputError, "empty-input")
NEGASCOPE_ERROR(AlignmentError, "alignment")
NEGASCOPE_ERROR(CompletenessError, "completeness")
NEGASCOPE_ERROR(IoError, "io")
NEGASCOPE_ERROR(DependencyError, "dependency")

#undef NEGASCOPE_ERROR

} // namespace negascope
