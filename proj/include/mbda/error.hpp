#ifndef MBDA_ERROR_HPP
#define MBDA_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace mbda {

enum class ErrorKind {
  Io,
  Parse,
  NegativeCount,
  DuplicateId,
  InvalidArgument,
  DegenerateDataset,
  TreeMismatch,
  EmptySample,
  DegenerateQuantile,
  RleInadmissible,
  TmmDegenerate,
  InvalidParameter,
  InconsistentState,
  ModelMismatch,
  NumericalFailure,
  NotApplicable,
  Undefined,
  Config,
};

[[nodiscard]] std::string_view to_string(ErrorKind kind);

// Every failure the library reports carries a kind so callers (and tests) can
// branch on the category without parsing messages.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace mbda

#endif
