#pragma once
#include <stdexcept>
#include <string>

namespace hvc {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define HVC_DEFINE_ERROR(Name)                                      \
    struct Name : Error {                                           \
        explicit Name(const std::string& msg = #Name) : Error(msg) {} \
    }

// core
HVC_DEFINE_ERROR(EmptyCloud);
HVC_DEFINE_ERROR(InsufficientPoints);
HVC_DEFINE_ERROR(DegenerateExtent);
HVC_DEFINE_ERROR(NotNormalized);
HVC_DEFINE_ERROR(VoxelOutOfRange);
// io
HVC_DEFINE_ERROR(ParseError);
HVC_DEFINE_ERROR(TruncatedBody);
HVC_DEFINE_ERROR(UnsupportedFormat);
HVC_DEFINE_ERROR(IoError);
HVC_DEFINE_ERROR(EndOfStream);
// sampling / codec
HVC_DEFINE_ERROR(WeightShapeError);
HVC_DEFINE_ERROR(FeatureDimTooSmall);
HVC_DEFINE_ERROR(TargetTooSmall);
HVC_DEFINE_ERROR(DecodeError);
// phy
HVC_DEFINE_ERROR(UnsupportedOrder);
HVC_DEFINE_ERROR(LengthError);
HVC_DEFINE_ERROR(InvalidDistribution);
HVC_DEFINE_ERROR(InvalidFeature);
HVC_DEFINE_ERROR(PartitionError);
HVC_DEFINE_ERROR(EmptyTable);
// metrics
HVC_DEFINE_ERROR(InvalidPeak);
HVC_DEFINE_ERROR(NormalsRequired);
// harness
HVC_DEFINE_ERROR(ConfigError);
HVC_DEFINE_ERROR(InvalidParameter);
HVC_DEFINE_ERROR(ColumnError);

#undef HVC_DEFINE_ERROR

}  // namespace hvc
