#pragma once

#include <stdexcept>
#include <string>

namespace pinning {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define PINNING_DEFINE_ERROR(Name)                 \
    class Name : public Error {                    \
    public:                                        \
        using Error::Error;                        \
    }

PINNING_DEFINE_ERROR(DomainError);
PINNING_DEFINE_ERROR(SingularInputError);
PINNING_DEFINE_ERROR(QuadratureError);
PINNING_DEFINE_ERROR(CoverageError);
PINNING_DEFINE_ERROR(NoSurfaceError);
PINNING_DEFINE_ERROR(HolderViolationError);
PINNING_DEFINE_ERROR(DegenerateSurfaceError);
PINNING_DEFINE_ERROR(AdmissibilityError);
PINNING_DEFINE_ERROR(CertificationError);
PINNING_DEFINE_ERROR(BarrierViolationError);
PINNING_DEFINE_ERROR(BlowUpError);
PINNING_DEFINE_ERROR(ConfigError);

#undef PINNING_DEFINE_ERROR

}  // namespace pinning
