#pragma once

#include <stdexcept>
#include <string>

namespace fifa {

// Base class for all hard failures raised by the library. Report-style
// operations (tree validation, sample validation) return violation lists
// instead of throwing.
class Error : public std::runtime_error {
  public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

  private:
    std::string code_;
};

inline Error make_error(const std::string& code, const std::string& message) {
    return Error(code, message);
}

}  // namespace fifa
