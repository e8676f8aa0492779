#include "k2t/remote.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "k2t/error.hpp"

namespace k2t {

using nlohmann::json;

namespace {

void ignore_sigpipe() {
  static const bool done = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

FdTransport::FdTransport(int read_fd, int write_fd, bool owns) : read_fd_(read_fd), write_fd_(write_fd), owns_(owns) {
  ignore_sigpipe();
}

FdTransport::~FdTransport() { close_fds(); }

void FdTransport::close_fds() {
  if (!owns_) return;
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  read_fd_ = write_fd_ = -1;
  owns_ = false;
}

void FdTransport::send_line(std::string_view line) {
  std::string msg(line);
  msg.push_back('\n');
  std::size_t off = 0;
  while (off < msg.size()) {
    const ssize_t n = ::write(write_fd_, msg.data() + off, msg.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProviderError("transport write failed: " + errno_text());
    }
    off += static_cast<std::size_t>(n);
  }
}

bool FdTransport::try_receive_line(std::string& line) {
  while (true) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      line = buffer_.substr(0, nl);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      buffer_.erase(0, nl + 1);
      return true;
    }
    char chunk[65536];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProviderError("transport read failed: " + errno_text());
    }
    if (n == 0) {
      if (buffer_.empty()) return false;
      line = std::move(buffer_);
      buffer_.clear();
      return true;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string FdTransport::receive_line() {
  std::string line;
  if (!try_receive_line(line)) throw ProviderError("provider closed the connection");
  return line;
}

ChildProcessTransport::ChildProcessTransport(int rfd, int wfd, int pid) : FdTransport(rfd, wfd, true), pid_(pid) {}

ChildProcessTransport::~ChildProcessTransport() {
  close_fds();
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

std::unique_ptr<ChildProcessTransport> spawn_child_transport(const std::string& command) {
  ignore_sigpipe();
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw ProviderError("pipe failed: " + errno_text());
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw ProviderError("pipe failed: " + errno_text());
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw ProviderError("fork failed: " + errno_text());
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  ::fcntl(to_child[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child[0], F_SETFD, FD_CLOEXEC);
  return std::unique_ptr<ChildProcessTransport>(new ChildProcessTransport(from_child[0], to_child[1], pid));
}

std::unique_ptr<FdTransport> connect_tcp(const std::string& host_port) {
  ignore_sigpipe();
  const auto colon = host_port.rfind(':');
  if (colon == std::string::npos) throw ProviderError("expected HOST:PORT, got '" + host_port + "'");
  const std::string host = host_port.substr(0, colon);
  const std::string port = host_port.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw ProviderError("cannot resolve '" + host_port + "': " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProviderError("cannot connect to '" + host_port + "': " + errno_text());
  return std::make_unique<FdTransport>(fd, fd, true);
}

CallbackTransport::CallbackTransport(std::vector<std::string> greeting, Handler handler)
    : queue_(greeting.begin(), greeting.end()), handler_(std::move(handler)) {}

void CallbackTransport::send_line(std::string_view line) {
  for (auto& reply : handler_(line)) queue_.push_back(std::move(reply));
}

std::string CallbackTransport::receive_line() {
  if (queue_.empty()) throw ProviderError("provider closed the connection");
  std::string line = std::move(queue_.front());
  queue_.pop_front();
  return line;
}

namespace {

json parse_message(const std::string& line) {
  json msg;
  try {
    msg = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProviderError(std::string("malformed provider message: ") + e.what());
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
    throw ProviderError("provider message without a type");
  return msg;
}

}  // namespace

Vocabulary remote_handshake(LineTransport& transport) {
  const json msg = parse_message(transport.receive_line());
  if (msg["type"] == "error") throw ProviderError("provider error: " + msg.value("message", std::string("?")));
  if (msg["type"] != "hello") throw ProviderError("expected hello handshake, got '" + msg["type"].get<std::string>() + "'");
  try {
    auto tokens = msg.at("tokens").get<std::vector<std::string>>();
    return Vocabulary(std::move(tokens), msg.at("bos_id").get<TokenId>(), msg.at("eos_id").get<TokenId>());
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed hello: ") + e.what());
  } catch (const ContractError& e) {
    throw ProviderError(std::string("invalid provider vocabulary: ") + e.what());
  }
}

RemoteModel::RemoteModel(std::unique_ptr<LineTransport> transport)
    : transport_(std::move(transport)), vocab_(remote_handshake(*transport_)) {}

ScoreVector RemoteModel::logprobs(std::span<const TokenId> context) {
  const std::int64_t id = next_id_++;
  json req = {{"type", "logprobs"}, {"id", id}, {"context_ids", std::vector<TokenId>(context.begin(), context.end())}};
  transport_->send_line(req.dump());
  const json msg = parse_message(transport_->receive_line());
  const std::string type = msg["type"];
  if (type == "hello") throw ProviderError("duplicate handshake");
  if (type == "error")
    throw ProviderError("provider error for request " + std::to_string(id) + ": " +
                        msg.value("message", std::string("?")));
  if (type != "logprobs") throw ProviderError("unexpected message type '" + type + "'");
  if (!msg.contains("id") || !msg["id"].is_number_integer() || msg["id"].get<std::int64_t>() != id)
    throw ProviderError("response id does not match request " + std::to_string(id));
  if (!msg.contains("values") || !msg["values"].is_array()) throw ProviderError("response without values");
  const auto& arr = msg["values"];
  if (arr.size() != vocab_.size())
    throw ProviderError("response has " + std::to_string(arr.size()) + " values, vocabulary has " +
                        std::to_string(vocab_.size()));
  ScoreVector sv;
  sv.step_index = static_cast<int>(context.size());
  sv.values.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw ProviderError("non-numeric value in response");
    sv.values.push_back(v.get<double>());
  }
  const double lse = logsumexp(sv.values);
  if (!std::isfinite(lse) || std::abs(lse) > 1e-3)
    throw ProviderError("response is not a normalized log-probability vector");
  return sv;
}

std::string ProtocolServer::hello() const {
  const auto& v = model_.vocabulary();
  return json{{"type", "hello"}, {"tokens", v.tokens()}, {"bos_id", v.bos()}, {"eos_id", v.eos()}}.dump();
}

std::string ProtocolServer::handle(std::string_view request) {
  std::int64_t id = -1;
  try {
    const json msg = json::parse(request);
    if (msg.contains("id") && msg["id"].is_number_integer()) id = msg["id"].get<std::int64_t>();
    if (!msg.is_object() || msg.value("type", std::string()) != "logprobs")
      throw ContractError("expected a logprobs request");
    if (id < 0) throw ContractError("request without an integer id");
    auto ctx = msg.at("context_ids").get<std::vector<TokenId>>();
    const auto v = static_cast<TokenId>(model_.vocabulary().size());
    for (TokenId t : ctx)
      if (t < 0 || t >= v) throw ContractError("context id out of range");
    auto sv = model_.logprobs(ctx);
    return json{{"type", "logprobs"}, {"id", id}, {"values", sv.values}}.dump();
  } catch (const std::exception& e) {
    return json{{"type", "error"}, {"id", id}, {"message", e.what()}}.dump();
  }
}

void ProtocolServer::serve(FdTransport& transport) {
  transport.send_line(hello());
  std::string line;
  while (transport.try_receive_line(line)) {
    if (line.empty()) continue;
    transport.send_line(handle(line));
  }
}

void serve_tcp(LanguageModel& model, int port, int max_connections, const std::function<void(int)>& on_listening) {
  ignore_sigpipe();
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw ProviderError("socket failed: " + errno_text());
  int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 4) != 0) {
    const std::string err = errno_text();
    ::close(listener);
    throw ProviderError("cannot listen on port " + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listening) on_listening(ntohs(addr.sin_port));
  ProtocolServer server(model);
  for (int served = 0; max_connections <= 0 || served < max_connections; ++served) {
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    FdTransport conn(fd, fd, true);
    try {
      server.serve(conn);
    } catch (const ProviderError&) {
      // peer vanished; wait for the next one
    }
  }
  ::close(listener);
}

}  // namespace k2t
