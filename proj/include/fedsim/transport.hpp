#pragma once

#include "fedsim/config.hpp"
#include "fedsim/data.hpp"
#include "fedsim/strategies.hpp"
#include "fedsim/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace fedsim {

/// What the server delivers to every client once the round barrier clears:
/// the packed per-client deltas (FedSmart), the new global parameters
/// (FedAvg / FedSGD / LoAdaBoost), or a bare barrier release.
struct RoundReply {
  enum class Kind { kPackedDeltas, kNewParams, kBarrierOnly };
  Kind kind = Kind::kBarrierOnly;
  std::vector<Vector> packed;  // client-id order, length n when present
  Vector new_params;           // flat d+1 when present
};

/// Client-side behaviour shared by the in-process channel and the TCP client
/// runner: holds the client's partition and its self-maintained parameters
/// (plus the peer-weight row under FedSmart).
class ClientSim {
 public:
  ClientSim(const ExperimentConfig& config, int client_id);

  void set_initial_params(const ModelParams& params);
  ClientUpdate train_round(int round);
  void consume_reply(int round, const RoundReply& reply);

  int id() const { return partition_.client_id; }
  const ClientPartition& partition() const { return partition_; }
  const ModelParams& params() const { return params_; }

 private:
  ExperimentConfig config_;
  ClientPartition partition_;
  ModelParams params_;
  PeerWeights weights_;
  Vector last_delta_;
};

/// Server-side view of one round of the update exchange. collect_updates
/// blocks until every client's UPDATE for the round arrived and returns them
/// normalized to client-id order regardless of arrival order.
class UpdateChannel {
 public:
  virtual ~UpdateChannel() = default;
  virtual std::vector<ClientUpdate> collect_updates(int round) = 0;
  virtual void complete_round(int round, const RoundReply& reply) = 0;
  virtual void shutdown() = 0;
};

/// Direct calls into n in-process ClientSims; no serialization.
class InProcessChannel : public UpdateChannel {
 public:
  InProcessChannel(const ExperimentConfig& config, const ModelParams& initial);
  std::vector<ClientUpdate> collect_updates(int round) override;
  void complete_round(int round, const RoundReply& reply) override;
  void shutdown() override {}

 private:
  std::vector<ClientSim> clients_;
};

struct TcpOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks an ephemeral port; see bound_port()
};

/// Newline-delimited JSON over TCP, one persistent connection per client.
/// The constructor binds and listens; wait_for_clients performs the
/// HELLO / INIT_MODEL handshake with all n clients, after which one reader
/// thread per connection feeds a round-keyed mailbox.
class TcpServerChannel : public UpdateChannel {
 public:
  TcpServerChannel(const ExperimentConfig& config, const ModelParams& initial,
                   std::vector<long> train_sizes, const TcpOptions& options);
  ~TcpServerChannel() override;

  int bound_port() const;
  void wait_for_clients();

  std::vector<ClientUpdate> collect_updates(int round) override;
  void complete_round(int round, const RoundReply& reply) override;
  void shutdown() override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Runs one TCP client to completion: connect, handshake, then train and
/// self-maintain through every round until the server's SHUTDOWN.
void run_tcp_client(const ExperimentConfig& config, int client_id,
                    const std::string& host, int port);

}  // namespace fedsim
