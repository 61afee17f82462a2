#pragma once

// HTTP/JSON front end:
//   POST /api/analyze  {"sentence": string, "k": int?}  -> encoding grid
//   GET  /api/model                                    -> metadata for rendering
// Requests read an immutable Workbench snapshot; load() swaps it atomically.

#include <memory>
#include <mutex>
#include <string>
#include <utility>

// Eigen must come before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "psevis/analysis.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace psevis {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t default_k = 3;
  double dominance_fraction = 0.1;
  /// Served at "/" when non-empty.
  std::string static_dir;
};

struct ApiResponse {
  int status = 200;
  std::string body;
};

class PseService {
 public:
  explicit PseService(ServiceConfig config) : config_(std::move(config)) {}

  void load(std::shared_ptr<const Workbench> workbench) {
    std::lock_guard lock(mutex_);
    snapshot_ = std::move(workbench);
  }

  std::shared_ptr<const Workbench> snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_;
  }

  const ServiceConfig& config() const noexcept { return config_; }

  ApiResponse handle_analyze(const std::string& request_body) const {
    const auto wb = snapshot();
    if (!wb) return error(503, "no model loaded");
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(request_body);
    } catch (const nlohmann::json::exception&) {
      return error(400, "request body is not valid JSON");
    }
    if (!req.is_object() || !req.contains("sentence") || !req["sentence"].is_string()) {
      return error(400, "request needs a string field 'sentence'");
    }
    const auto sentence = req["sentence"].get<std::string>();
    if (detail::split_whitespace(sentence).empty()) return error(400, "sentence is empty");

    EncodingConfig enc = EncodingConfig::for_vocabulary(wb->vocab.size(), config_.default_k,
                                                        config_.dominance_fraction);
    if (req.contains("k") && !req["k"].is_null()) {
      if (!req["k"].is_number_integer() || req["k"].get<long long>() < 1) {
        return error(400, "'k' must be a positive integer");
      }
      enc.bar_count = static_cast<std::size_t>(
          std::min<long long>(req["k"].get<long long>(), static_cast<long long>(wb->vocab.size())));
    }
    try {
      wb->check_complete();
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
    try {
      const auto grid = analyze_sentence(sentence, *wb, enc);
      return {200, grid_to_json(grid, wb->num_layers()).dump()};
    } catch (const IngestionError& e) {
      return error(400, e.what());
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }

  ApiResponse handle_model_info() const {
    const auto wb = snapshot();
    if (!wb) return error(503, "no model loaded");
    try {
      wb->check_complete();
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
    std::map<StateKind, const ProbeTableRow*> table;
    for (const auto& row : wb->bundle.table) table[row.kind] = &row;

    nlohmann::ordered_json kinds = nlohmann::ordered_json::array();
    nlohmann::ordered_json perplexities = nlohmann::ordered_json::object();
    for (const auto& kind : all_state_kinds(wb->num_layers())) {
      nlohmann::ordered_json k{{"name", kind.name()},
                               {"type", kind.type_name()},
                               {"layer", kind.layer},
                               {"column", kind.column()}};
      if (const auto it = table.find(kind); it != table.end()) {
        k["train_ppl"] = it->second->train_perplexity;
        k["test_ppl"] = it->second->test_perplexity;
        perplexities[kind.name()] = it->second->test_perplexity;
      }
      kinds.push_back(std::move(k));
    }
    nlohmann::ordered_json colormap = nlohmann::ordered_json::array();
    for (const auto& tc : wb->tags.tag_colors()) {
      colormap.push_back({{"tag", tc.tag}, {"color", to_hex(tc.color)}});
    }
    const auto enc = EncodingConfig::for_vocabulary(wb->vocab.size(), config_.default_k,
                                                    config_.dominance_fraction);
    nlohmann::ordered_json info{
        {"V", wb->params.vocab_size()},
        {"N", wb->params.hidden_size()},
        {"U", wb->num_layers()},
        {"model_hash", wb->model_hash},
        {"kinds", std::move(kinds)},
        {"layout_hints", layout_hints(wb->num_layers())},
        {"colormap", std::move(colormap)},
        {"default_tag", wb->tags.default_tag()},
        {"default_k", enc.bar_count},
        {"dominance_k", enc.dominance_k},
        {"perplexities", std::move(perplexities)},
        {"rnn_perplexity",
         {{"train", wb->bundle.rnn_train_perplexity}, {"test", wb->bundle.rnn_test_perplexity}}}};
    return {200, info.dump()};
  }

  /// Registers the API routes (and static hosting) on `server`.
  void mount(httplib::Server& server) const {
    server.Post("/api/analyze", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, handle_analyze(req.body));
    });
    server.Get("/api/model", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, handle_model_info());
    });
    if (!config_.static_dir.empty()) server.set_mount_point("/", config_.static_dir);
  }

 private:
  static ApiResponse error(int status, const std::string& message) {
    return {status, nlohmann::json{{"error", message}}.dump()};
  }

  static void reply(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  }

  ServiceConfig config_;
  mutable std::mutex mutex_;
  std::shared_ptr<const Workbench> snapshot_;
};

}  // namespace psevis
