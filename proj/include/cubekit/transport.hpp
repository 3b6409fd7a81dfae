#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

namespace cubekit {

using Json = nlohmann::json;

/// One JSON request object in, one JSON response object out. Implementations
/// must be safe to call from several threads at once.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Json call(const Json& request) = 0;
};

/// Stable key of a request: FNV-1a of its canonical (sorted-key) dump, hex.
std::string request_key(const Json& request);

/// Serves canned responses from `<dir>/<request_key>.json`. A missing file is
/// a TransportError naming the key and the request.
class CannedTransport : public Transport {
 public:
  explicit CannedTransport(std::filesystem::path dir);
  Json call(const Json& request) override;

 private:
  std::filesystem::path dir_;
};

/// Runs `/bin/sh -c command` per request: writes the request as one JSON line
/// to its stdin and parses the first line of its stdout.
class StdioTransport : public Transport {
 public:
  explicit StdioTransport(std::string command) : command_(std::move(command)) {}
  Json call(const Json& request) override;

 private:
  std::string command_;
};

/// POSTs the request as application/json to `url` (http://host:port/path).
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(const std::string& url);
  Json call(const Json& request) override;

 private:
  std::string base_;
  std::string path_;
};

/// Retries TransportError up to `attempts` times in total. Requests are
/// pure lookups, so repeating them is harmless.
class RetryingTransport : public Transport {
 public:
  RetryingTransport(std::shared_ptr<Transport> inner, int attempts)
      : inner_(std::move(inner)), attempts_(attempts < 1 ? 1 : attempts) {}
  Json call(const Json& request) override;

 private:
  std::shared_ptr<Transport> inner_;
  int attempts_;
};

/// Builds a transport from a spec string: "dir:<path>", "cmd:<shell command>"
/// or an http:// URL. A bare existing directory is treated as "dir:".
std::shared_ptr<Transport> make_transport(const std::string& spec, int attempts = 3);

}  // namespace cubekit
