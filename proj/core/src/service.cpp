#include "xmodal/service.hpp"

#include <chrono>
#include <charconv>

#include "httplib.h"
#include "json.hpp"
#include "xmodal/error.hpp"
#include "xmodal/log.hpp"

namespace xmodal {

namespace {

using json = nlohmann::ordered_json;

HttpReply error_reply(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

}  // namespace

SearchHandler::SearchHandler(std::shared_ptr<const ServiceState> state)
    : state_(std::move(state)) {}

HttpReply SearchHandler::healthz() const { return {200, "ok", "text/plain"}; }

HttpReply SearchHandler::stats() const {
  json j;
  j["entries"] = state_->index.size();
  j["dim"] = state_->index.dim();
  j["embeddings_loaded"] = state_->embeddings.has_value();
  j["model_loaded"] = state_->params.has_value();
  j["metadata"] = state_->metadata;
  return {200, j.dump()};
}

HttpReply SearchHandler::search(std::string_view body) const {
  const auto start = std::chrono::steady_clock::now();
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error& e) {
    return error_reply(400, std::string("malformed JSON body: ") + e.what());
  }
  if (!req.is_object()) return error_reply(400, "request body must be a JSON object");

  const bool has_vector = req.contains("vector");
  const bool has_id = req.contains("study_id");
  if (has_vector == has_id) return error_reply(400, "exactly one of 'vector' or 'study_id' is required");

  std::size_t k = 10;
  if (req.contains("k")) {
    const auto& kj = req["k"];
    if (!kj.is_number_integer()) return error_reply(400, "'k' must be an integer");
    const auto kv = kj.get<long long>();
    if (kv < 1 || kv > static_cast<long long>(kMaxSearchK)) {
      return error_reply(400, "'k' must lie in [1, " + std::to_string(kMaxSearchK) + "]");
    }
    k = static_cast<std::size_t>(kv);
  }

  SearchResult hits;
  try {
    if (has_vector) {
      const auto& vj = req["vector"];
      if (!vj.is_array()) return error_reply(400, "'vector' must be an array of numbers");
      Vector q;
      q.reserve(vj.size());
      for (const auto& x : vj) {
        if (!x.is_number()) return error_reply(400, "'vector' must be an array of numbers");
        q.push_back(x.get<double>());
      }
      if (q.size() != state_->index.dim()) {
        return error_reply(400, "vector has dimension " + std::to_string(q.size()) +
                                    ", expected D=" + std::to_string(state_->index.dim()));
      }
      hits = state_->index.search(q, k);
    } else {
      if (!req["study_id"].is_string()) return error_reply(400, "'study_id' must be a string");
      Modality modality = Modality::Image;
      if (req.contains("modality")) {
        const auto m = req["modality"].is_string()
                           ? modality_from_string(req["modality"].get<std::string>())
                           : std::nullopt;
        if (!m) return error_reply(400, "'modality' must be \"image\" or \"text\"");
        modality = *m;
      }
      if (!state_->embeddings) {
        return error_reply(400, "study_id queries need an embedding set; none is loaded");
      }
      const ModelParams* params = state_->params ? &*state_->params : nullptr;
      hits = query_by_id(state_->index, *state_->embeddings, params,
                         req["study_id"].get<std::string>(), modality, k);
    }
  } catch (const NotFoundError& e) {
    return error_reply(404, e.what());
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }

  json resp;
  auto& results = resp["results"] = json::array();
  for (const auto& h : hits) {
    results.push_back({{"study_id", h.study_id}, {"label", to_string(h.label)}, {"score", h.score}});
  }
  resp["took_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {200, resp.dump()};
}

// ---------------------------------------------------------------- HTTP

struct SearchServer::Impl {
  explicit Impl(std::shared_ptr<const ServiceState> state) : handler(std::move(state)) {
    auto send = [](httplib::Response& res, const HttpReply& r) {
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.Post("/v1/search", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, handler.search(req.body));
    });
    server.Get("/v1/healthz", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, handler.healthz());
    });
    server.Get("/v1/stats", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, handler.stats());
    });
  }

  SearchHandler handler;
  httplib::Server server;
};

SearchServer::SearchServer(std::shared_ptr<const ServiceState> state)
    : impl_(std::make_unique<Impl>(std::move(state))) {}

SearchServer::~SearchServer() { stop(); }

int SearchServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void SearchServer::listen() { impl_->server.listen_after_bind(); }
void SearchServer::stop() {
  if (impl_) impl_->server.stop();
}
void SearchServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

ServiceState load_service_state(const std::filesystem::path& index_path,
                                const std::filesystem::path& embeddings_path,
                                const std::filesystem::path& model_path) {
  ServiceState s;
  s.index = load_index(index_path);
  s.metadata["index_path"] = index_path.string();
  if (!embeddings_path.empty()) {
    s.embeddings = read_embeddings(embeddings_path);
    if (s.embeddings->dim != s.index.dim()) {
      throw ShapeError("embedding dimension does not match index dimension");
    }
    s.metadata["embeddings_path"] = embeddings_path.string();
  }
  if (!model_path.empty()) {
    s.params = load_params(model_path);
    if (s.params->dim != s.index.dim()) {
      throw ShapeError("model dimension does not match index dimension");
    }
    s.metadata["model_path"] = model_path.string();
  }
  return s;
}

std::pair<std::string, int> parse_bind_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw ParameterError("bind address must look like host:port, got '" + std::string(address) + "'");
  }
  const std::string_view port_str = address.substr(colon + 1);
  int port = -1;
  const auto [ptr, ec] = std::from_chars(port_str.data(), port_str.data() + port_str.size(), port);
  if (ec != std::errc{} || ptr != port_str.data() + port_str.size() || port < 0 || port > 65535) {
    throw ParameterError("invalid port in bind address '" + std::string(address) + "'");
  }
  return {std::string(address.substr(0, colon)), port};
}

}  // namespace xmodal
