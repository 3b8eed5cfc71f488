#ifndef AQUANET_ERRORS_HPP_
#define AQUANET_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace aquanet {

/// Base of every error raised by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &what) : std::runtime_error(what) {}
};

#define AQUANET_DEFINE_ERROR(Name)                                             \
  class Name : public Error {                                                  \
   public:                                                                     \
    explicit Name(const std::string &what) : Error(#Name ": " + what) {}       \
  }

AQUANET_DEFINE_ERROR(MalformedTaxonomy);
AQUANET_DEFINE_ERROR(ShapeMismatch);
AQUANET_DEFINE_ERROR(NonFiniteGradient);
AQUANET_DEFINE_ERROR(BadInputShape);
AQUANET_DEFINE_ERROR(ConfigInvalid);
AQUANET_DEFINE_ERROR(AllPixelsIgnored);
AQUANET_DEFINE_ERROR(DivergedLoss);
AQUANET_DEFINE_ERROR(EmptyDataset);
AQUANET_DEFINE_ERROR(IdOutOfRange);
AQUANET_DEFINE_ERROR(EmptyScope);
AQUANET_DEFINE_ERROR(LengthMismatch);
AQUANET_DEFINE_ERROR(DegenerateVariance);
AQUANET_DEFINE_ERROR(NoImagesForLabel);
AQUANET_DEFINE_ERROR(MisalignedPair);
AQUANET_DEFINE_ERROR(SingleClassDataset);
AQUANET_DEFINE_ERROR(InvalidSpec);
AQUANET_DEFINE_ERROR(IoFailure);
AQUANET_DEFINE_ERROR(CheckpointError);

#undef AQUANET_DEFINE_ERROR

} // namespace aquanet

#endif // AQUANET_ERRORS_HPP_
