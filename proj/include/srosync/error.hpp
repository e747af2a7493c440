#pragma once

#include <stdexcept>
#include <string>

namespace srosync {

enum class ErrorKind {
  kEmptyInput,
  kData,
  kConfig,
  kDomain,
  kNumeric,
  kAlignment,
  kGeometry,
  kShape,
  kInput,
  kIo,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; `kind()` selects the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kEmptyInput: return "empty-input error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kAlignment: return "alignment error";
    case ErrorKind::kGeometry: return "geometry error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kInput: return "input error";
    case ErrorKind::kIo: return "I/O error";
  }
  return "error";
}

}  // namespace srosync
