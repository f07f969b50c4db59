#pragma once

// JSON-over-HTTP front end to one loaded model. Handlers are plain functions
// of the request so they can be exercised with or without a socket.

#include <atomic>
#include <memory>
#include <string>

#include "g2s/model.hpp"

namespace g2s {

struct ServiceRequest {
  std::string method;  // "GET" | "POST"
  std::string path;
  std::string body;
  bool full_points = false;  // ?full=1
};

struct ServiceResponse {
  int status = 200;
  std::string body;  // JSON
};

inline constexpr std::size_t kServicePointCap = 512;

class Service {
public:
  explicit Service(std::shared_ptr<const Model> model, std::size_t n_points = 1024);
  ServiceResponse handle(const ServiceRequest& req) const;
  const Model& model() const { return *model_; }

private:
  ServiceResponse vocab() const;
  ServiceResponse generate(const ServiceRequest& req) const;
  ServiceResponse manipulate(const ServiceRequest& req) const;
  ServiceResponse validate(const ServiceRequest& req) const;

  std::shared_ptr<const Model> model_;
  std::size_t n_points_;
};

/// Blocking HTTP server around a Service. stop() may be called from any thread.
class HttpServer {
public:
  explicit HttpServer(const Service& service);
  ~HttpServer();
  /// Binds host:port (port 0 picks a free one); returns the bound port.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();
  void wait_until_ready() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace g2s
