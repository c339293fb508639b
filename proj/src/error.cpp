#include "predbio/error.hpp"

namespace predbio {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::empty_dataset: return "empty_dataset";
    case Errc::non_finite: return "non_finite";
    case Errc::missing_column: return "missing_column";
    case Errc::non_numeric: return "non_numeric";
    case Errc::zero_range: return "zero_range";
    case Errc::duplicate_id: return "duplicate_id";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::arm_absent: return "arm_absent";
    case Errc::nan_loss: return "nan_loss";
    case Errc::wrong_mode: return "wrong_mode";
    case Errc::no_conv_layer: return "no_conv_layer";
    case Errc::unknown_digit: return "unknown_digit";
    case Errc::io: return "io";
    case Errc::config: return "config";
  }
  return "unknown";
}

}  // namespace predbio
