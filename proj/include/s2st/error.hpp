#pragma once

#include <stdexcept>
#include <string>

namespace s2st {

// Base for every error raised by the library. The CLI maps ConfigError to
// exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define S2ST_DEFINE_ERROR(Name)            \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  };

S2ST_DEFINE_ERROR(EmptyCorpus)
S2ST_DEFINE_ERROR(EmptySentence)
S2ST_DEFINE_ERROR(ParseError)
S2ST_DEFINE_ERROR(DurationOverflow)
S2ST_DEFINE_ERROR(InfeasibleConstraints)
S2ST_DEFINE_ERROR(NumericalError)
S2ST_DEFINE_ERROR(EmptyPool)
S2ST_DEFINE_ERROR(TemplateExhausted)
S2ST_DEFINE_ERROR(TemplateMismatch)
S2ST_DEFINE_ERROR(InvalidConfig)
S2ST_DEFINE_ERROR(MetricUndefined)
S2ST_DEFINE_ERROR(IoError)
S2ST_DEFINE_ERROR(FormatError)
S2ST_DEFINE_ERROR(VersionError)
S2ST_DEFINE_ERROR(CorruptCheckpoint)

#undef S2ST_DEFINE_ERROR

}  // namespace s2st
