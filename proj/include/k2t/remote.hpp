#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "k2t/language_model.hpp"

namespace k2t {

// One protocol message per line, newline excluded. Implementations throw
// ProviderError on transport failure or end of stream.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void send_line(std::string_view line) = 0;
  virtual std::string receive_line() = 0;
};

// Reads from one file descriptor and writes to another. Does not own them
// unless `owns` is set.
class FdTransport : public LineTransport {
 public:
  FdTransport(int read_fd, int write_fd, bool owns = false);
  ~FdTransport() override;
  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void send_line(std::string_view line) override;
  std::string receive_line() override;
  // Same as receive_line but returns false at a clean end of stream.
  bool try_receive_line(std::string& line);

 protected:
  void close_fds();

 private:
  int read_fd_;
  int write_fd_;
  bool owns_;
  std::string buffer_;
};

// Launches `/bin/sh -c command` and talks to it over its stdin/stdout.
class ChildProcessTransport final : public FdTransport {
 public:
  ~ChildProcessTransport() override;

 private:
  friend std::unique_ptr<ChildProcessTransport> spawn_child_transport(const std::string& command);
  ChildProcessTransport(int rfd, int wfd, int pid);
  int pid_;
};

std::unique_ptr<ChildProcessTransport> spawn_child_transport(const std::string& command);

// Connects to host:port.
std::unique_ptr<FdTransport> connect_tcp(const std::string& host_port);

// In-process transport: each sent line goes to `handler`, whose returned
// lines are queued for receive_line(). `greeting` is queued up front.
class CallbackTransport final : public LineTransport {
 public:
  using Handler = std::function<std::vector<std::string>(std::string_view)>;
  CallbackTransport(std::vector<std::string> greeting, Handler handler);

  void send_line(std::string_view line) override;
  std::string receive_line() override;

 private:
  std::deque<std::string> queue_;
  Handler handler_;
};

// Reads and validates the provider's hello message.
Vocabulary remote_handshake(LineTransport& transport);

// Client side of the line-delimited logprobs protocol. Requests are strictly
// serialized; one instance serves one generation at a time.
class RemoteModel final : public LanguageModel {
 public:
  explicit RemoteModel(std::unique_ptr<LineTransport> transport);

  const Vocabulary& vocabulary() const override { return vocab_; }
  ScoreVector logprobs(std::span<const TokenId> context) override;

 private:
  std::unique_ptr<LineTransport> transport_;
  Vocabulary vocab_;
  std::int64_t next_id_ = 0;
};

// Provider side: turns a model into protocol messages.
class ProtocolServer {
 public:
  explicit ProtocolServer(LanguageModel& model) : model_(model) {}

  std::string hello() const;
  // Response line for one request line. Malformed requests yield an error
  // message; the caller keeps serving.
  std::string handle(std::string_view request);

  // Sends hello, then answers requests until the peer closes the stream.
  void serve(FdTransport& transport);

 private:
  LanguageModel& model_;
};

// Accepts connections on `port` one at a time, serving each until it closes.
// `max_connections` <= 0 serves forever. `on_listening` gets the bound port.
void serve_tcp(LanguageModel& model, int port, int max_connections = 0,
               const std::function<void(int)>& on_listening = {});

}  // namespace k2t
