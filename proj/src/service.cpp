#include "g2s/service.hpp"

#include <httplib.h>

#include "g2s/documents.hpp"
#include "g2s/error.hpp"
#include "g2s/scene.hpp"

namespace g2s {

namespace {

struct InvalidGraph {
  ValidationReport report;
};

ServiceResponse json_response(int status, const Json& j) { return {status, j.dump()}; }

ServiceResponse error_response(int status, const std::string& code, const std::string& message, const Json& extra = {}) {
  Json j{{"code", code}, {"message", message}};
  if (!extra.is_null()) j["report"] = extra;
  return json_response(status, j);
}

ServiceResponse parse_failure(const ParseError& e) {
  ValidationReport r;
  r.violations.push_back({"parse error", e.location(), e.what()});
  return error_response(400, "invalid_body", e.what(), report_to_json(r));
}

std::uint64_t request_seed(const Json& body) {
  if (!body.contains("seed") || body["seed"].is_null()) return 0;
  if (!body["seed"].is_number_unsigned() && !(body["seed"].is_number_integer() && body["seed"].get<std::int64_t>() >= 0))
    throw ParseError("/seed", "expected a non-negative integer");
  return body["seed"].get<std::uint64_t>();
}

SceneGraph checked_graph(const Json& body, const Vocabulary& v) {
  SceneGraph g = graph_from_json(detail::require_key(body, "graph", ""), v, "/graph");
  ValidationReport r = validate_graph(g, v);
  if (!r.ok()) throw InvalidGraph{r};
  return g;
}

}  // namespace

Service::Service(std::shared_ptr<const Model> model, std::size_t n_points) : model_(std::move(model)), n_points_(n_points) {
  if (!model_) throw Error("service requires a model");
}

ServiceResponse Service::handle(const ServiceRequest& req) const {
  try {
    if (req.method == "GET" && req.path == "/health") return json_response(200, Json{{"status", "ok"}});
    if (req.method == "GET" && req.path == "/vocab") return vocab();
    if (req.method == "POST" && req.path == "/generate") return generate(req);
    if (req.method == "POST" && req.path == "/manipulate") return manipulate(req);
    if (req.method == "POST" && req.path == "/validate") return validate(req);
    return error_response(404, "not_found", "no endpoint " + req.method + " " + req.path);
  } catch (const InvalidGraph& e) {
    return error_response(400, "invalid_graph", "graph failed validation", report_to_json(e.report));
  } catch (const ParseError& e) {
    return parse_failure(e);
  } catch (const std::exception& e) {
    return error_response(500, "decode_failure", e.what());
  }
}

ServiceResponse Service::vocab() const { return json_response(200, vocabulary_to_json(model_->vocab)); }

ServiceResponse Service::generate(const ServiceRequest& req) const {
  const Json body = parse_json(req.body);
  const SceneGraph g = checked_graph(body, model_->vocab);
  const std::uint64_t seed = request_seed(body);
  GenerateOptions opt;
  opt.n_points = n_points_;
  const Scene s = g2s::generate(*model_, g, seed, opt);
  return json_response(200, Json{{"scene", scene_to_json(s, model_->vocab, req.full_points ? 0 : kServicePointCap)}});
}

ServiceResponse Service::manipulate(const ServiceRequest& req) const {
  const Json body = parse_json(req.body);
  const Vocabulary& v = model_->vocab;
  const SceneGraph g = checked_graph(body, v);
  const Scene s = scene_from_json(detail::require_key(body, "scene", ""), v, "/scene");
  try {
    check_alignment(s, g);
  } catch (const Error& e) {
    throw ParseError("/scene", e.what());
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i)
    if (!s.objects[i].shape_code) throw ParseError("/scene/objects/" + std::to_string(i), "manipulation needs shape codes");
  GraphChange c = change_from_json(detail::require_key(body, "change", ""), g, v, "/change");
  SceneGraph edited;
  try {
    edited = apply_change(g, c);
  } catch (const Error& e) {
    throw ParseError("/change", e.what());
  }
  const ValidationReport r = validate_graph(edited, v);
  if (!r.ok()) throw InvalidGraph{r};
  const std::uint64_t seed = request_seed(body);
  GenerateOptions opt;
  opt.n_points = n_points_;
  const Scene out = manipulate_scene(*model_, g, s, c, seed, opt);
  Json ids = Json::array();
  if (!c.empty()) {
    const auto mask = compute_change_mask(g, c);
    for (std::size_t i = 0; i < edited.nodes.size(); ++i)
      if (mask[i]) ids.push_back(edited.nodes[i].id);
  }
  return json_response(200, Json{{"scene", scene_to_json(out, v, req.full_points ? 0 : kServicePointCap)}, {"changed_ids", ids}});
}

ServiceResponse Service::validate(const ServiceRequest& req) const {
  const Json body = parse_json(req.body);
  const Json& gj = body.is_object() && body.contains("graph") ? body["graph"] : body;
  const SceneGraph g = graph_from_json(gj, model_->vocab, body.contains("graph") ? "/graph" : "");
  const ValidationReport r = validate_graph(g, model_->vocab);
  if (!r.ok()) return error_response(400, "invalid_graph", "graph failed validation", report_to_json(r));
  return json_response(200, report_to_json(r));
}

struct HttpServer::Impl {
  const Service& service;
  httplib::Server server;
  explicit Impl(const Service& s) : service(s) {}
};

HttpServer::HttpServer(const Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  const Service* svc = &service;
  auto route = [svc](const char* method) {
    return [svc, method](const httplib::Request& q, httplib::Response& res) {
      ServiceRequest r{method, q.path, q.body, q.has_param("full") && q.get_param_value("full") == "1"};
      ServiceResponse out = svc->handle(r);
      res.status = out.status;
      res.set_content(out.body, "application/json");
    };
  };
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Get(".*", route("GET"));
  srv.Post(".*", route("POST"));
  srv.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace g2s
