#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "xmodal/dataset.hpp"
#include "xmodal/index.hpp"
#include "xmodal/model.hpp"

namespace xmodal {

inline constexpr std::size_t kMaxSearchK = 1000;

/// Everything the service reads. Shared read-only between request threads.
struct ServiceState {
  FusedIndex index;
  std::optional<EmbeddingSet> embeddings;  // needed for study_id queries
  std::optional<ModelParams> params;       // adapters for study_id queries
  std::map<std::string, std::string> metadata;
};

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Request handling independent of the transport.
class SearchHandler {
 public:
  explicit SearchHandler(std::shared_ptr<const ServiceState> state);

  HttpReply search(std::string_view body) const;
  HttpReply healthz() const;
  HttpReply stats() const;

 private:
  std::shared_ptr<const ServiceState> state_;
};

/// HTTP/1.1 front end: POST /v1/search, GET /v1/healthz, GET /v1/stats.
class SearchServer {
 public:
  explicit SearchServer(std::shared_ptr<const ServiceState> state);
  ~SearchServer();
  SearchServer(const SearchServer&) = delete;
  SearchServer& operator=(const SearchServer&) = delete;

  /// Binds without serving. Port 0 picks a free port. Returns the bound port
  /// or throws IoError.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

ServiceState load_service_state(const std::filesystem::path& index_path,
                                const std::filesystem::path& embeddings_path = {},
                                const std::filesystem::path& model_path = {});

/// Splits "host:port"; throws ParameterError on malformed input.
std::pair<std::string, int> parse_bind_address(std::string_view address);

}  // namespace xmodal
