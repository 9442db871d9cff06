#pragma once

#include <stdexcept>

namespace fedsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Round/ordering violations of the update-exchange protocol (duplicate or
/// missing updates, round mismatches).
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Socket-level failures; the message names the client where known.
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed wire lines; the message names the offending field.
struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fedsim
