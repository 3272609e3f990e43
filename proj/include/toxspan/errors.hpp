#pragma once

#include <stdexcept>

namespace toxspan {

// Invalid configuration value or key.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace toxspan
