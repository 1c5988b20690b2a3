#pragma once

#include "synood/backends.hpp"

#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace synood {

/// Serves POST /v1/{concepts,inpaint,segment} by delegating to in-process backends.
/// Protocol errors map to 400 {code: invalid_request}, transport errors to
/// 503 {code: unavailable}, a missing role to 501 {code: unimplemented}.
class BackendServer {
 public:
  BackendServer(std::shared_ptr<ConceptBackend> concepts, std::shared_ptr<InpaintBackend> inpaint,
                std::shared_ptr<SegmentBackend> segment);
  ~BackendServer();

  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  /// Binds to host:port (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen_blocking(const std::string& host, int port);
  void stop();

  std::string base_url() const;

 private:
  void install_routes();

  std::shared_ptr<ConceptBackend> concepts_;
  std::shared_ptr<InpaintBackend> inpaint_;
  std::shared_ptr<SegmentBackend> segment_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

}  // namespace synood
