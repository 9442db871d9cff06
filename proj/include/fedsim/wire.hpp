#pragma once

#include "fedsim/errors.hpp"
#include "fedsim/types.hpp"

#include <string>
#include <string_view>

namespace fedsim {

enum class MsgType { kHello, kInitModel, kUpdate, kRoundComplete, kShutdown };

std::string to_string(MsgType type);

/// One protocol message. client_id is the sender for client-to-server
/// messages and the addressee for server-to-client messages, except that a
/// relayed UPDATE keeps the id of the client that produced the delta.
struct WireMessage {
  MsgType type = MsgType::kHello;
  int round = 0;
  int client_id = 0;
  Vector payload;  // empty or length d+1
};

/// Serializes to a single newline-terminated JSON line with fields
/// type, round, client_id, payload (in that order). Payload reals use the
/// shortest representation that parses back to the identical double.
std::string encode(const WireMessage& msg);

/// Inverse of encode. `expected_payload_len` is d+1; a payload must be empty
/// or exactly that long. Throws DecodeError naming the offending field.
WireMessage decode(std::string_view line, Eigen::Index expected_payload_len);

}  // namespace fedsim
