#include "gam/service.hpp"

#include <limits>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace gam {

struct ScoringService::Impl {
  DetectorContract detector;
  httplib::Server server;
  std::thread worker;
  std::atomic<std::uint64_t> counter{0};
  std::string host;
  int port = 0;
};

ScoringService::ScoringService(DetectorContract detector, const std::string& host, int port)
    : impl_(std::make_unique<Impl>()) {
  impl_->detector = std::move(detector);
  impl_->host = host;

  auto* impl = impl_.get();
  impl->server.Post("/score", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->counter.fetch_add(1, std::memory_order_relaxed);
    const auto* data = reinterpret_cast<const std::uint8_t*>(req.body.data());
    const double score = impl->detector.score(ByteView(data, req.body.size()));
    res.set_content(nlohmann::json{{"score", score}}.dump(), "application/json");
  });
  impl->server.Post("/label", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->counter.fetch_add(1, std::memory_order_relaxed);
    const auto* data = reinterpret_cast<const std::uint8_t*>(req.body.data());
    const int label = impl->detector.label(ByteView(data, req.body.size())) ? 1 : 0;
    res.set_content(nlohmann::json{{"label", label}}.dump(), "application/json");
  });
  impl->server.Get("/stats", [impl](const httplib::Request&, httplib::Response& res) {
    res.set_content(
        nlohmann::json{{"queries", impl->counter.load(std::memory_order_relaxed)}}.dump(),
        "application/json");
  });
  impl->server.set_payload_max_length(1ull << 30);

  if (port == 0) {
    impl->port = impl->server.bind_to_any_port(host);
    if (impl->port <= 0) throw BindFailure("cannot bind " + host);
  } else {
    if (!impl->server.bind_to_port(host, port))
      throw BindFailure("cannot bind " + host + ":" + std::to_string(port));
    impl->port = port;
  }
  impl->worker = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

ScoringService::~ScoringService() { stop(); }

int ScoringService::port() const { return impl_->port; }

std::uint64_t ScoringService::queries() const {
  return impl_->counter.load(std::memory_order_relaxed);
}

std::string ScoringService::base_url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

void ScoringService::stop() {
  if (impl_ && impl_->worker.joinable()) {
    impl_->server.stop();
    impl_->worker.join();
  }
}

DetectorContract remote_detector(const std::string& base_url, LabelMode mode, double theta) {
  const char* path = mode == LabelMode::Soft ? "/score" : "/label";
  const char* key = mode == LabelMode::Soft ? "score" : "label";

  DetectorContract det;
  det.mode = mode;
  det.theta = mode == LabelMode::Soft ? theta : 1.0;
  det.score = [base_url, path, key, mode](ByteView bytes) -> double {
    const std::string body(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    std::string last_error;
    for (int attempt = 0; attempt <= kRemoteRetries; ++attempt) {
      httplib::Client client(base_url);
      client.set_read_timeout(60, 0);
      auto res = client.Post(path, body, "application/octet-stream");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP status " + std::to_string(res->status);
        continue;
      }
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(std::string("unparseable response body: ") + e.what());
      }
      if (!doc.contains(key) || !doc[key].is_number())
        throw MalformedResponse("response missing numeric '" + std::string(key) + "'");
      if (mode == LabelMode::Soft) return doc[key].get<double>();
      return doc[key].get<int>() == 1 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    throw CandidateEvaluationFailed("scoring request to " + base_url + path + " failed after " +
                                    std::to_string(kRemoteRetries + 1) + " attempts: " +
                                    last_error);
  };
  return det;
}

}  // namespace gam
