#include "fedsim/transport.hpp"

#include "fedsim/errors.hpp"
#include "fedsim/model.hpp"
#include "fedsim/wire.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

namespace fedsim {

// ---------------------------------------------------------------------------
// ClientSim

ClientSim::ClientSim(const ExperimentConfig& config, int client_id)
    : config_(config),
      partition_(build_client_partition(config, client_id)),
      params_(kFeatureDim),
      weights_{client_id, Vector::Constant(config.n_clients, 1.0 / config.n_clients)} {}

void ClientSim::set_initial_params(const ModelParams& params) { params_ = params; }

ClientUpdate ClientSim::train_round(int round) {
  ClientUpdate update = compute_client_update(config_, params_, partition_, round);
  if (config_.strategy == StrategyKind::kLocal) last_delta_ = update.delta;
  return update;
}

void ClientSim::consume_reply(int round, const RoundReply& reply) {
  (void)round;
  switch (config_.strategy) {
    case StrategyKind::kFedSmart: {
      if (reply.kind != RoundReply::Kind::kPackedDeltas)
        throw ProtocolError("client " + std::to_string(id()) + ": expected packed deltas");
      if (static_cast<int>(reply.packed.size()) != config_.n_clients)
        throw ProtocolError("client " + std::to_string(id()) + ": packed delta count mismatch");
      FedsmartStep step = fedsmart_client_step(params_, weights_, reply.packed,
                                               partition_.validation, config_.eta);
      params_ = std::move(step.model);
      weights_ = std::move(step.weights);
      return;
    }
    case StrategyKind::kFedAvg:
    case StrategyKind::kFedSgd:
    case StrategyKind::kLoAdaBoost: {
      if (reply.kind != RoundReply::Kind::kNewParams)
        throw ProtocolError("client " + std::to_string(id()) + ": expected new parameters");
      params_ = ModelParams::from_flat(reply.new_params);
      return;
    }
    case StrategyKind::kLocal:
      apply_delta(params_, last_delta_);
      return;
    case StrategyKind::kCentralized:
      return;
  }
}

// ---------------------------------------------------------------------------
// InProcessChannel

InProcessChannel::InProcessChannel(const ExperimentConfig& config, const ModelParams& initial) {
  clients_.reserve(static_cast<std::size_t>(config.n_clients));
  for (int i = 0; i < config.n_clients; ++i) {
    clients_.emplace_back(config, i);
    clients_.back().set_initial_params(initial);
  }
}

std::vector<ClientUpdate> InProcessChannel::collect_updates(int round) {
  std::vector<ClientUpdate> updates;
  updates.reserve(clients_.size());
  for (ClientSim& client : clients_) updates.push_back(client.train_round(round));
  return updates;
}

void InProcessChannel::complete_round(int round, const RoundReply& reply) {
  for (ClientSim& client : clients_) client.consume_reply(round, reply);
}

// ---------------------------------------------------------------------------
// Socket plumbing

namespace {

class LineSocket {
 public:
  explicit LineSocket(int fd = -1) : fd_(fd) {}
  LineSocket(const LineSocket&) = delete;
  LineSocket& operator=(const LineSocket&) = delete;
  LineSocket(LineSocket&& other) noexcept { *this = std::move(other); }
  LineSocket& operator=(LineSocket&& other) noexcept {
    if (this != &other) {
      close_fd();
      fd_ = other.fd_;
      buffer_ = std::move(other.buffer_);
      other.fd_ = -1;
    }
    return *this;
  }
  ~LineSocket() { close_fd(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  /// Next newline-terminated line without the terminator; nullopt on clean EOF.
  std::optional<std::string> read_line() {
    for (;;) {
      const auto pos = buffer_.find('\n');
      if (pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t got = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (got == 0) {
        if (!buffer_.empty()) throw TransportError("connection closed mid-line");
        return std::nullopt;
      }
      if (got < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("recv failed: ") + std::strerror(errno));
      }
      buffer_.append(chunk, static_cast<std::size_t>(got));
    }
  }

  void write_all(const std::string& data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("send failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  /// Wakes any thread blocked in recv on this socket without closing the fd.
  void shutdown_rw() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  void close_fd() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
  std::string buffer_;
};

sockaddr_in make_address(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw TransportError("invalid IPv4 address: " + host);
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

// ---------------------------------------------------------------------------
// TcpServerChannel

struct TcpServerChannel::Impl {
  ExperimentConfig config;
  ModelParams initial;
  std::vector<long> train_sizes;
  Eigen::Index payload_len = 0;

  int listener = -1;
  int bound_port = 0;
  std::vector<LineSocket> connections;  // indexed by client id
  std::vector<std::thread> readers;

  std::mutex mu;
  std::condition_variable cv;
  std::map<int, std::vector<std::optional<Vector>>> pending;  // round -> slots
  int collected_through = -1;
  bool shutting_down = false;
  std::exception_ptr error;

  ~Impl() {
    {
      std::lock_guard<std::mutex> lock(mu);
      shutting_down = true;
      cv.notify_all();
    }
    for (LineSocket& conn : connections) conn.shutdown_rw();
    if (listener >= 0) ::close(listener);
    for (std::thread& t : readers)
      if (t.joinable()) t.join();
  }

  void fail(std::exception_ptr e) {
    std::lock_guard<std::mutex> lock(mu);
    if (!error) error = e;
    cv.notify_all();
  }

  void reader_loop(int client_id) {
    try {
      LineSocket& conn = connections[static_cast<std::size_t>(client_id)];
      for (;;) {
        std::optional<std::string> line;
        try {
          line = conn.read_line();
        } catch (const TransportError&) {
          std::lock_guard<std::mutex> lock(mu);
          if (shutting_down) return;
          throw;
        }
        if (!line) {
          std::lock_guard<std::mutex> lock(mu);
          if (shutting_down) return;
          throw TransportError("client " + std::to_string(client_id) + " disconnected");
        }
        const WireMessage msg = decode(*line, payload_len);
        if (msg.type != MsgType::kUpdate)
          throw ProtocolError("client " + std::to_string(client_id) + " sent unexpected " +
                              to_string(msg.type));
        if (msg.client_id != client_id)
          throw ProtocolError("connection for client " + std::to_string(client_id) +
                              " carried an update from client " + std::to_string(msg.client_id));
        if (msg.payload.size() != payload_len)
          throw ProtocolError("client " + std::to_string(client_id) + " sent an empty update payload");

        std::lock_guard<std::mutex> lock(mu);
        if (shutting_down) return;
        if (msg.round <= collected_through)
          throw ProtocolError("duplicate or stale update from client " + std::to_string(client_id) +
                              " for round " + std::to_string(msg.round));
        auto& slots = pending[msg.round];
        if (slots.empty()) slots.resize(static_cast<std::size_t>(config.n_clients));
        auto& slot = slots[static_cast<std::size_t>(client_id)];
        if (slot.has_value())
          throw ProtocolError("duplicate update for round " + std::to_string(msg.round) +
                              " from client " + std::to_string(client_id));
        slot = msg.payload;
        cv.notify_all();
      }
    } catch (...) {
      fail(std::current_exception());
    }
  }
};

TcpServerChannel::TcpServerChannel(const ExperimentConfig& config, const ModelParams& initial,
                                   std::vector<long> train_sizes, const TcpOptions& options)
    : impl_(std::make_unique<Impl>()) {
  impl_->config = config;
  impl_->initial = initial;
  impl_->train_sizes = std::move(train_sizes);
  impl_->payload_len = initial.dim() + 1;
  if (static_cast<int>(impl_->train_sizes.size()) != config.n_clients)
    throw std::invalid_argument("TcpServerChannel: train_sizes must have one entry per client");

  impl_->listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (impl_->listener < 0) throw TransportError(std::string("socket failed: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(impl_->listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr = make_address(options.host, options.port);
  if (::bind(impl_->listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
    throw TransportError("bind to " + options.host + ":" + std::to_string(options.port) +
                         " failed: " + std::strerror(errno));
  if (::listen(impl_->listener, config.n_clients) < 0)
    throw TransportError(std::string("listen failed: ") + std::strerror(errno));

  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  if (::getsockname(impl_->listener, reinterpret_cast<sockaddr*>(&bound), &len) < 0)
    throw TransportError(std::string("getsockname failed: ") + std::strerror(errno));
  impl_->bound_port = ntohs(bound.sin_port);
}

TcpServerChannel::~TcpServerChannel() = default;

int TcpServerChannel::bound_port() const { return impl_->bound_port; }

void TcpServerChannel::wait_for_clients() {
  const int n = impl_->config.n_clients;
  impl_->connections.resize(static_cast<std::size_t>(n));
  int registered = 0;
  while (registered < n) {
    const int fd = ::accept(impl_->listener, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("accept failed: ") + std::strerror(errno));
    }
    set_nodelay(fd);
    LineSocket conn(fd);
    const auto line = conn.read_line();
    if (!line) throw TransportError("client disconnected during handshake");
    const WireMessage hello = decode(*line, impl_->payload_len);
    if (hello.type != MsgType::kHello)
      throw ProtocolError("expected HELLO during handshake, got " + to_string(hello.type));
    if (hello.client_id < 0 || hello.client_id >= n)
      throw ProtocolError("HELLO with out-of-range client_id " + std::to_string(hello.client_id));
    if (impl_->connections[static_cast<std::size_t>(hello.client_id)].valid())
      throw ProtocolError("duplicate HELLO from client " + std::to_string(hello.client_id));

    WireMessage init;
    init.type = MsgType::kInitModel;
    init.round = 0;
    init.client_id = hello.client_id;
    init.payload = impl_->initial.flat();
    conn.write_all(encode(init));
    impl_->connections[static_cast<std::size_t>(hello.client_id)] = std::move(conn);
    ++registered;
  }
  for (int i = 0; i < n; ++i)
    impl_->readers.emplace_back([impl = impl_.get(), i] { impl->reader_loop(i); });
}

std::vector<ClientUpdate> TcpServerChannel::collect_updates(int round) {
  Impl& s = *impl_;
  std::unique_lock<std::mutex> lock(s.mu);
  s.cv.wait(lock, [&] {
    if (s.error) return true;
    const auto it = s.pending.find(round);
    if (it == s.pending.end()) return false;
    for (const auto& slot : it->second)
      if (!slot.has_value()) return false;
    return true;
  });
  if (s.error) std::rethrow_exception(s.error);

  std::vector<ClientUpdate> updates;
  updates.reserve(static_cast<std::size_t>(s.config.n_clients));
  auto& slots = s.pending[round];
  for (int i = 0; i < s.config.n_clients; ++i) {
    ClientUpdate u;
    u.client_id = i;
    u.delta = std::move(*slots[static_cast<std::size_t>(i)]);
    u.train_size = s.train_sizes[static_cast<std::size_t>(i)];
    updates.push_back(std::move(u));
  }
  s.pending.erase(round);
  s.collected_through = round;
  return updates;
}

void TcpServerChannel::complete_round(int round, const RoundReply& reply) {
  Impl& s = *impl_;
  {
    std::lock_guard<std::mutex> lock(s.mu);
    if (s.error) std::rethrow_exception(s.error);
  }
  for (int k = 0; k < s.config.n_clients; ++k) {
    std::string block;
    if (reply.kind == RoundReply::Kind::kPackedDeltas) {
      for (int j = 0; j < static_cast<int>(reply.packed.size()); ++j) {
        WireMessage relayed;
        relayed.type = MsgType::kUpdate;
        relayed.round = round;
        relayed.client_id = j;
        relayed.payload = reply.packed[static_cast<std::size_t>(j)];
        block += encode(relayed);
      }
    } else if (reply.kind == RoundReply::Kind::kNewParams) {
      WireMessage params;
      params.type = MsgType::kInitModel;
      params.round = round + 1;
      params.client_id = k;
      params.payload = reply.new_params;
      block += encode(params);
    }
    WireMessage done;
    done.type = MsgType::kRoundComplete;
    done.round = round;
    done.client_id = k;
    block += encode(done);
    s.connections[static_cast<std::size_t>(k)].write_all(block);
  }
}

void TcpServerChannel::shutdown() {
  Impl& s = *impl_;
  {
    std::lock_guard<std::mutex> lock(s.mu);
    if (s.shutting_down) return;
    s.shutting_down = true;
    s.cv.notify_all();
  }
  for (int k = 0; k < static_cast<int>(s.connections.size()); ++k) {
    LineSocket& conn = s.connections[static_cast<std::size_t>(k)];
    if (!conn.valid()) continue;
    WireMessage bye;
    bye.type = MsgType::kShutdown;
    bye.round = s.collected_through + 1;
    bye.client_id = k;
    try {
      conn.write_all(encode(bye));
    } catch (const TransportError&) {
      // Client already gone; shutdown proceeds.
    }
  }
}

// ---------------------------------------------------------------------------
// TCP client

namespace {

LineSocket connect_with_retry(const std::string& host, int port) {
  const sockaddr_in addr = make_address(host, port);
  for (int attempt = 0;; ++attempt) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError(std::string("socket failed: ") + std::strerror(errno));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
      set_nodelay(fd);
      return LineSocket(fd);
    }
    const int err = errno;
    ::close(fd);
    if (attempt >= 25 || (err != ECONNREFUSED && err != ETIMEDOUT))
      throw TransportError("connect to " + host + ":" + std::to_string(port) +
                           " failed: " + std::strerror(err));
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
}

}  // namespace

void run_tcp_client(const ExperimentConfig& config, int client_id,
                    const std::string& host, int port) {
  if (client_id < 0 || client_id >= config.n_clients)
    throw std::invalid_argument("run_tcp_client: client_id out of range");

  ClientSim sim(config, client_id);
  const Eigen::Index payload_len = kFeatureDim + 1;
  LineSocket conn = connect_with_retry(host, port);

  WireMessage hello;
  hello.type = MsgType::kHello;
  hello.round = 0;
  hello.client_id = client_id;
  conn.write_all(encode(hello));

  const auto init_line = conn.read_line();
  if (!init_line) throw TransportError("server closed during handshake");
  const WireMessage init = decode(*init_line, payload_len);
  if (init.type != MsgType::kInitModel || init.round != 0)
    throw ProtocolError("expected INIT_MODEL for round 0, got " + to_string(init.type));
  if (init.payload.size() != payload_len)
    throw ProtocolError("INIT_MODEL carried no parameters");
  sim.set_initial_params(ModelParams::from_flat(init.payload));

  for (int round = 0; round < config.rounds; ++round) {
    const ClientUpdate update = sim.train_round(round);
    WireMessage msg;
    msg.type = MsgType::kUpdate;
    msg.round = round;
    msg.client_id = client_id;
    msg.payload = update.delta;
    conn.write_all(encode(msg));

    RoundReply reply;
    std::vector<bool> seen(static_cast<std::size_t>(config.n_clients), false);
    for (;;) {
      const auto line = conn.read_line();
      if (!line) throw TransportError("server closed mid-round " + std::to_string(round));
      const WireMessage incoming = decode(*line, payload_len);
      if (incoming.type == MsgType::kRoundComplete) {
        if (incoming.round != round)
          throw ProtocolError("ROUND_COMPLETE for round " + std::to_string(incoming.round) +
                              " while in round " + std::to_string(round));
        break;
      }
      if (incoming.type == MsgType::kUpdate) {
        if (incoming.round != round)
          throw ProtocolError("relayed update for wrong round " + std::to_string(incoming.round));
        if (incoming.client_id < 0 || incoming.client_id >= config.n_clients)
          throw ProtocolError("relayed update with bad client_id");
        if (reply.packed.empty())
          reply.packed.resize(static_cast<std::size_t>(config.n_clients));
        if (seen[static_cast<std::size_t>(incoming.client_id)])
          throw ProtocolError("duplicate relayed update for client " +
                              std::to_string(incoming.client_id));
        seen[static_cast<std::size_t>(incoming.client_id)] = true;
        reply.packed[static_cast<std::size_t>(incoming.client_id)] = incoming.payload;
        reply.kind = RoundReply::Kind::kPackedDeltas;
        continue;
      }
      if (incoming.type == MsgType::kInitModel) {
        if (incoming.round != round + 1)
          throw ProtocolError("INIT_MODEL for wrong round " + std::to_string(incoming.round));
        reply.new_params = incoming.payload;
        reply.kind = RoundReply::Kind::kNewParams;
        continue;
      }
      if (incoming.type == MsgType::kShutdown)
        throw TransportError("server shut down before round " + std::to_string(round) + " completed");
      throw ProtocolError("unexpected " + to_string(incoming.type) + " mid-round");
    }
    if (reply.kind == RoundReply::Kind::kPackedDeltas) {
      for (bool got : seen)
        if (!got) throw ProtocolError("incomplete packed deltas before ROUND_COMPLETE");
    }
    sim.consume_reply(round, reply);
  }

  // Courteous wait for SHUTDOWN; EOF is equally fine here.
  const auto bye = conn.read_line();
  if (bye) {
    const WireMessage msg = decode(*bye, payload_len);
    if (msg.type != MsgType::kShutdown)
      throw ProtocolError("expected SHUTDOWN at end of experiment, got " + to_string(msg.type));
  }
}

}  // namespace fedsim
