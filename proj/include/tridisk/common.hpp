#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace tridisk {

using cx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr cx kI{0.0, 1.0};

// Error carrying a short machine-readable code, e.g. "unconverged".
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

}  // namespace tridisk
