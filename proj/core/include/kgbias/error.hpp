#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kgbias {

// Error category, mapped to CLI exit codes (usage=1, data=2, internal=3).
enum class ErrorKind { Usage, Data, Internal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string_view stage, const std::string& what)
        : std::runtime_error("[" + std::string(stage) + "] " + what),
          kind_(kind),
          stage_(stage) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& stage() const noexcept { return stage_; }

private:
    ErrorKind kind_;
    std::string stage_;
};

[[noreturn]] inline void usage_error(std::string_view stage, const std::string& what) {
    throw Error(ErrorKind::Usage, stage, what);
}

[[noreturn]] inline void data_error(std::string_view stage, const std::string& what) {
    throw Error(ErrorKind::Data, stage, what);
}

[[noreturn]] inline void internal_error(std::string_view stage, const std::string& what) {
    throw Error(ErrorKind::Internal, stage, what);
}

}  // namespace kgbias
