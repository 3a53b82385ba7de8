#pragma once

#include <stdexcept>
#include <string>

namespace rah {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error { using Error::Error; };
class LookupError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DecodeError : public Error { using Error::Error; };
class MigrationError : public Error { using Error::Error; };
class RunError : public Error { using Error::Error; };

// Transport failures are retryable; the gateway backs off before giving up.
class TransportError : public Error { using Error::Error; };

class MalformedResponse : public Error { using Error::Error; };

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

} // namespace rah
