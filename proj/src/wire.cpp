#include "fedsim/wire.hpp"

#include "json.hpp"

#include <cmath>

namespace fedsim {

std::string to_string(MsgType type) {
  switch (type) {
    case MsgType::kHello: return "HELLO";
    case MsgType::kInitModel: return "INIT_MODEL";
    case MsgType::kUpdate: return "UPDATE";
    case MsgType::kRoundComplete: return "ROUND_COMPLETE";
    case MsgType::kShutdown: return "SHUTDOWN";
  }
  throw std::logic_error("unreachable message type");
}

namespace {

MsgType type_from_string(const std::string& s) {
  if (s == "HELLO") return MsgType::kHello;
  if (s == "INIT_MODEL") return MsgType::kInitModel;
  if (s == "UPDATE") return MsgType::kUpdate;
  if (s == "ROUND_COMPLETE") return MsgType::kRoundComplete;
  if (s == "SHUTDOWN") return MsgType::kShutdown;
  throw DecodeError("unknown message type: '" + s + "'");
}

}  // namespace

std::string encode(const WireMessage& msg) {
  nlohmann::ordered_json j;
  j["type"] = to_string(msg.type);
  j["round"] = msg.round;
  j["client_id"] = msg.client_id;
  auto payload = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < msg.payload.size(); ++i) payload.push_back(msg.payload(i));
  j["payload"] = std::move(payload);
  return j.dump() + "\n";
}

WireMessage decode(std::string_view line, Eigen::Index expected_payload_len) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("malformed JSON line: ") + e.what());
  }
  if (!j.is_object()) throw DecodeError("message is not a JSON object");

  WireMessage msg;
  if (!j.contains("type") || !j["type"].is_string()) throw DecodeError("field 'type' missing or not a string");
  msg.type = type_from_string(j["type"].get<std::string>());

  if (!j.contains("round") || !j["round"].is_number_integer())
    throw DecodeError("field 'round' missing or not an integer");
  msg.round = j["round"].get<int>();
  if (msg.round < 0) throw DecodeError("field 'round' must be >= 0");

  if (!j.contains("client_id") || !j["client_id"].is_number_integer())
    throw DecodeError("field 'client_id' missing or not an integer");
  msg.client_id = j["client_id"].get<int>();

  if (!j.contains("payload") || !j["payload"].is_array())
    throw DecodeError("field 'payload' missing or not an array");
  const auto& payload = j["payload"];
  const auto len = static_cast<Eigen::Index>(payload.size());
  if (len != 0 && len != expected_payload_len)
    throw DecodeError("field 'payload' has length " + std::to_string(len) + ", expected 0 or " +
                      std::to_string(expected_payload_len));
  msg.payload = Vector(len);
  for (Eigen::Index i = 0; i < len; ++i) {
    const auto& entry = payload[static_cast<std::size_t>(i)];
    if (!entry.is_number()) throw DecodeError("field 'payload' contains a non-numeric entry");
    msg.payload(i) = entry.get<double>();
    if (!std::isfinite(msg.payload(i))) throw DecodeError("field 'payload' contains a non-finite entry");
  }
  return msg;
}

}  // namespace fedsim
