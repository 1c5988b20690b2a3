#include "synood/backend_server.hpp"

#include "synood/errors.hpp"

#include <httplib.h>

using nlohmann::json;

namespace synood {

BackendServer::BackendServer(std::shared_ptr<ConceptBackend> concepts, std::shared_ptr<InpaintBackend> inpaint,
                             std::shared_ptr<SegmentBackend> segment)
    : concepts_(std::move(concepts)),
      inpaint_(std::move(inpaint)),
      segment_(std::move(segment)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

BackendServer::~BackendServer() { stop(); }

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class Handler>
httplib::Server::Handler wrap(Handler handler, bool available) {
  return [handler, available](const httplib::Request& req, httplib::Response& res) {
    if (!available) {
      reply(res, 501, error_body("unimplemented", "endpoint not configured"));
      return;
    }
    try {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("request body is not JSON: ") + e.what());
      }
      reply(res, 200, handler(body));
    } catch (const ProtocolError& e) {
      reply(res, 400, error_body("invalid_request", e.what()));
    } catch (const TransportError& e) {
      reply(res, 503, error_body("unavailable", e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, error_body("backend_error", e.what()));
    }
  };
}

}  // namespace

void BackendServer::install_routes() {
  server_->Post("/v1/concepts", wrap([this](const json& b) {
                  return to_wire(concepts_->concepts(concept_request_from_wire(b)));
                }, concepts_ != nullptr));
  server_->Post("/v1/inpaint", wrap([this](const json& b) {
                  return to_wire(inpaint_->inpaint(inpaint_request_from_wire(b)));
                }, inpaint_ != nullptr));
  server_->Post("/v1/segment", wrap([this](const json& b) {
                  return to_wire(segment_->segment(segment_request_from_wire(b)));
                }, segment_ != nullptr));
}

int BackendServer::start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void BackendServer::listen_blocking(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void BackendServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string BackendServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace synood
