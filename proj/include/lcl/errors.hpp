#pragma once

#include <stdexcept>
#include <string>

namespace lcl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LCL_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  };

LCL_DEFINE_ERROR(DimensionError)
LCL_DEFINE_ERROR(ContractError)
LCL_DEFINE_ERROR(ConfigError)
LCL_DEFINE_ERROR(FormatError)
LCL_DEFINE_ERROR(IntegrityError)
LCL_DEFINE_ERROR(GenerationError)
LCL_DEFINE_ERROR(EvolutionError)
LCL_DEFINE_ERROR(DependencyError)
LCL_DEFINE_ERROR(FrozenViolationError)
LCL_DEFINE_ERROR(IoError)

#undef LCL_DEFINE_ERROR

}  // namespace lcl
