#pragma once

#include <stdexcept>
#include <string>

namespace tdx {

/// Base of every error raised by the library. Each subclass maps to one
/// failure category so callers (and the CLI exit-code table) can dispatch on type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

#define TDX_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                             \
    public:                                                                 \
        using Error::Error;                                                 \
        const char* kind() const noexcept override { return #Name; }       \
    };

TDX_DEFINE_ERROR(OverflowError)
TDX_DEFINE_ERROR(ShapeError)
TDX_DEFINE_ERROR(FormatError)
TDX_DEFINE_ERROR(BoundOverflow)
TDX_DEFINE_ERROR(LayoutError)
TDX_DEFINE_ERROR(LengthError)
TDX_DEFINE_ERROR(WitnessInvalid)
TDX_DEFINE_ERROR(DegenerateChannel)
TDX_DEFINE_ERROR(ProtocolError)

#undef TDX_DEFINE_ERROR

} // namespace tdx
