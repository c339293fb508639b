#pragma once

#include <stdexcept>
#include <string>

namespace predbio {

enum class Errc {
  invalid_argument,
  empty_dataset,
  non_finite,
  missing_column,
  non_numeric,
  zero_range,
  duplicate_id,
  shape_mismatch,
  arm_absent,
  nan_loss,
  wrong_mode,
  no_conv_layer,
  unknown_digit,
  io,
  config,
};

const char* to_string(Errc code);

// Single exception type for the library; `code()` distinguishes failure classes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace predbio
