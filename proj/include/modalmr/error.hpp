#pragma once

#include <stdexcept>
#include <string>

namespace modalmr {

/// Broad class of a failure. Validation errors come from bad inputs or
/// parameters; numeric errors come from the computation itself.
enum class ErrorClass { validation, numeric };

class error : public std::runtime_error
{
public:
    error(ErrorClass cls, const std::string& what)
        : std::runtime_error(what), cls_(cls)
    {}

    ErrorClass error_class() const noexcept { return cls_; }

private:
    ErrorClass cls_;
};

#define MODALMR_DEFINE_ERROR(name, cls)                                       \
    class name : public error                                                 \
    {                                                                         \
    public:                                                                   \
        explicit name(const std::string& what)                                \
            : error(ErrorClass::cls, std::string(#name ": ") + what)          \
        {}                                                                    \
    }

MODALMR_DEFINE_ERROR(InvalidArgument, validation);
MODALMR_DEFINE_ERROR(DimensionMismatch, validation);
MODALMR_DEFINE_ERROR(ParseError, validation);
MODALMR_DEFINE_ERROR(NotStochastic, validation);
MODALMR_DEFINE_ERROR(NonGaussianPhi, validation);
MODALMR_DEFINE_ERROR(NonUniqueStationary, numeric);
MODALMR_DEFINE_ERROR(ZeroMass, numeric);
MODALMR_DEFINE_ERROR(NotReversible, numeric);
MODALMR_DEFINE_ERROR(SingularSystem, numeric);
MODALMR_DEFINE_ERROR(LineSearchFailed, numeric);
MODALMR_DEFINE_ERROR(NonSmoothNoise, numeric);

#undef MODALMR_DEFINE_ERROR

namespace detail {

template <class E = InvalidArgument>
inline void require(bool cond, const std::string& what)
{
    if (!cond) throw E(what);
}

} // namespace detail
} // namespace modalmr
