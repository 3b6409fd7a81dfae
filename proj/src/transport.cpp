#include "cubekit/transport.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>

#include <httplib.h>

#include "cubekit/error.hpp"
#include "cubekit/io.hpp"

extern char** environ;

namespace cubekit {

std::string request_key(const Json& request) { return io::hex64(io::fnv1a(request.dump())); }

CannedTransport::CannedTransport(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) {
    throw InputError("canned response directory not found: " + dir_.string());
  }
}

Json CannedTransport::call(const Json& request) {
  const auto key = request_key(request);
  const auto path = dir_ / (key + ".json");
  if (!std::filesystem::exists(path)) {
    throw TransportError("no canned response " + key + ".json for request " + request.dump());
  }
  try {
    return Json::parse(io::read_file(path));
  } catch (const Json::parse_error& e) {
    throw TransportError("canned response " + path.string() + " is not JSON: " + e.what());
  }
}

namespace {

struct Pipe {
  int fd[2] = {-1, -1};
  Pipe() {
    if (::pipe(fd) != 0) throw TransportError(std::string("pipe: ") + std::strerror(errno));
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  void close_read() {
    if (fd[0] >= 0) ::close(fd[0]);
    fd[0] = -1;
  }
  void close_write() {
    if (fd[1] >= 0) ::close(fd[1]);
    fd[1] = -1;
  }
};

}  // namespace

Json StdioTransport::call(const Json& request) {
  // A client that exits without reading stdin must not kill us.
  [[maybe_unused]] static const bool sigpipe_ignored = (std::signal(SIGPIPE, SIG_IGN), true);
  Pipe to_child, from_child;
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child.fd[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child.fd[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, to_child.fd[1]);
  posix_spawn_file_actions_addclose(&actions, from_child.fd[0]);

  std::string sh = "/bin/sh", flag = "-c", cmd = command_;
  char* argv[] = {sh.data(), flag.data(), cmd.data(), nullptr};
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw TransportError("spawn '" + command_ + "': " + std::strerror(rc));
  to_child.close_read();
  from_child.close_write();

  // Payloads are small; write everything before reading.
  const std::string payload = request.dump() + "\n";
  std::size_t off = 0;
  while (off < payload.size()) {
    const auto w = ::write(to_child.fd[1], payload.data() + off, payload.size() - off);
    if (w < 0) {
      if (errno == EINTR) continue;
      break;  // child exited early; its status is reported below
    }
    off += static_cast<std::size_t>(w);
  }
  to_child.close_write();

  std::string out;
  char buf[4096];
  while (true) {
    const auto r = ::read(from_child.fd[0], buf, sizeof buf);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) break;
    out.append(buf, static_cast<std::size_t>(r));
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw TransportError("client command '" + command_ + "' failed");
  }
  const auto nl = out.find('\n');
  try {
    return Json::parse(out.substr(0, nl));
  } catch (const Json::parse_error& e) {
    throw TransportError("client command '" + command_ + "' returned non-JSON: " + e.what());
  }
}

HttpTransport::HttpTransport(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.substr(0, scheme) != "http") {
    throw InputError("client URL must start with http://: " + url);
  }
  const auto path_start = url.find('/', scheme + 3);
  base_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

Json HttpTransport::call(const Json& request) {
  httplib::Client client(base_);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  auto res = client.Post(path_, request.dump(), "application/json");
  if (!res) throw TransportError("HTTP request to " + base_ + path_ + " failed");
  if (res->status != 200) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + base_ + path_);
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::parse_error& e) {
    throw TransportError("non-JSON HTTP response: " + std::string(e.what()));
  }
}

Json RetryingTransport::call(const Json& request) {
  for (int attempt = 1;; ++attempt) {
    try {
      return inner_->call(request);
    } catch (const TransportError&) {
      if (attempt >= attempts_) throw;
    }
  }
}

std::shared_ptr<Transport> make_transport(const std::string& spec, int attempts) {
  std::shared_ptr<Transport> inner;
  if (spec.rfind("dir:", 0) == 0) {
    // Canned lookups are deterministic; retrying a miss cannot help.
    return std::make_shared<CannedTransport>(spec.substr(4));
  } else if (spec.rfind("cmd:", 0) == 0) {
    inner = std::make_shared<StdioTransport>(spec.substr(4));
  } else if (spec.rfind("http://", 0) == 0) {
    inner = std::make_shared<HttpTransport>(spec);
  } else if (std::filesystem::is_directory(spec)) {
    return std::make_shared<CannedTransport>(spec);
  } else {
    throw InputError("unrecognized client spec '" + spec + "' (use dir:, cmd: or http://)");
  }
  return std::make_shared<RetryingTransport>(std::move(inner), attempts);
}

}  // namespace cubekit
