#pragma once
// Error type shared by all modules. Every failure carries a short
// machine-parsable tag (stable identifier) plus a human message; the CLI
// prints "error:<tag>: <message>" and exits nonzero.

#include <stdexcept>
#include <string>

namespace metaeu {

class Error : public std::runtime_error {
public:
    Error(std::string tag, const std::string& message)
        : std::runtime_error(tag + ": " + message), tag_(std::move(tag)) {}

    const std::string& tag() const { return tag_; }

private:
    std::string tag_;
};

} // namespace metaeu
