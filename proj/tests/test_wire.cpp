#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fedsim/rng.hpp"
#include "fedsim/wire.hpp"

#include <cmath>
#include <cstring>
#include <limits>

using namespace fedsim;

TEST_CASE("encode produces the documented line for a HELLO") {
  WireMessage msg;
  msg.type = MsgType::kHello;
  msg.round = 0;
  msg.client_id = 2;
  CHECK(encode(msg) == "{\"type\":\"HELLO\",\"round\":0,\"client_id\":2,\"payload\":[]}\n");
}

TEST_CASE("exactly representable payload values round-trip bitwise") {
  WireMessage msg;
  msg.type = MsgType::kUpdate;
  msg.round = 3;
  msg.client_id = 0;
  msg.payload = Vector(1);
  msg.payload << 0.5;
  const WireMessage back = decode(encode(msg), 1);
  CHECK(back.payload(0) == 0.5);
}

TEST_CASE("decode rejects malformed input naming the field") {
  CHECK_THROWS_AS(decode("not json at all", 11), DecodeError);
  CHECK_THROWS_AS(decode("[1,2,3]", 11), DecodeError);
  CHECK_THROWS_AS(decode(R"({"type":"NOPE","round":0,"client_id":0,"payload":[]})", 11), DecodeError);
  CHECK_THROWS_AS(decode(R"({"round":0,"client_id":0,"payload":[]})", 11), DecodeError);
  CHECK_THROWS_AS(decode(R"({"type":"UPDATE","round":-1,"client_id":0,"payload":[]})", 11), DecodeError);
  CHECK_THROWS_AS(decode(R"({"type":"UPDATE","round":0,"payload":[]})", 11), DecodeError);
  CHECK_THROWS_AS(decode(R"({"type":"UPDATE","round":0,"client_id":0})", 11), DecodeError);
  CHECK_THROWS_AS(decode(R"({"type":"UPDATE","round":0,"client_id":0,"payload":[1,2,3]})", 11),
                  DecodeError);
  CHECK_THROWS_AS(decode(R"({"type":"UPDATE","round":0,"client_id":0,"payload":["a"]})", 1),
                  DecodeError);

  try {
    decode(R"({"type":"UPDATE","round":0,"client_id":0,"payload":[1,2,3]})", 11);
    FAIL("expected DecodeError");
  } catch (const DecodeError& e) {
    CHECK(std::string(e.what()).find("payload") != std::string::npos);
  }
}

TEST_CASE("decode-encode is the identity over random messages") {
  Rng rng(301);
  const MsgType types[] = {MsgType::kHello, MsgType::kInitModel, MsgType::kUpdate,
                           MsgType::kRoundComplete, MsgType::kShutdown};
  int nonempty = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    WireMessage msg;
    msg.type = types[rng.next_below(5)];
    msg.round = static_cast<int>(rng.next_below(1000000));
    msg.client_id = static_cast<int>(rng.next_below(64));
    const Eigen::Index len = rng.bernoulli(0.8) ? 11 : 0;
    msg.payload = Vector(len);
    for (Eigen::Index i = 0; i < len; ++i) {
      // Random bit patterns cover subnormals, negative zero and extremes.
      double value;
      do {
        const std::uint64_t bits = rng.next_u64();
        std::memcpy(&value, &bits, sizeof(value));
      } while (!std::isfinite(value));
      msg.payload(i) = value;
    }
    if (len > 0) ++nonempty;

    const WireMessage back = decode(encode(msg), 11);
    CHECK(back.type == msg.type);
    CHECK(back.round == msg.round);
    CHECK(back.client_id == msg.client_id);
    REQUIRE(back.payload.size() == msg.payload.size());
    for (Eigen::Index i = 0; i < len; ++i) {
      CHECK(std::memcmp(&back.payload(i), &msg.payload(i), sizeof(double)) == 0);
    }
  }
  CHECK(nonempty > 0);
}

TEST_CASE("well-known awkward doubles round-trip bitwise") {
  const double values[] = {0.1,
                           -0.0,
                           1.0 / 3.0,
                           std::numeric_limits<double>::denorm_min(),
                           std::numeric_limits<double>::min(),
                           std::numeric_limits<double>::max(),
                           -1e-300,
                           4.9406564584124654e-320};
  WireMessage msg;
  msg.type = MsgType::kInitModel;
  msg.payload = Vector(8);
  for (int i = 0; i < 8; ++i) msg.payload(i) = values[i];
  const WireMessage back = decode(encode(msg), 8);
  for (int i = 0; i < 8; ++i)
    CHECK(std::memcmp(&back.payload(i), &values[i], sizeof(double)) == 0);
}
