#include "strokeshift/guidance.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "strokeshift/base64.hpp"
#include "strokeshift/errors.hpp"

namespace strokeshift {

using nlohmann::json;

GuidanceResponse target_match_gradient(const Image& image, const Image& target) {
  if (image.rows() != target.rows() || image.cols() != target.cols()) {
    throw ContractViolation("target_match_gradient: image and target dimensions differ");
  }
  const Image residual = image - target;
  const double count = static_cast<double>(residual.size());
  GuidanceResponse response;
  response.scalar_diag = residual.squaredNorm() / count;
  response.grad_image = (2.0 / count) * residual;
  response.provider_info = "local-target";
  return response;
}

GuidanceResponse TargetMatchProvider::gradient(const GuidanceRequest& request) {
  return target_match_gradient(request.image, target_);
}

std::string resolve_endpoint_url(const std::string& configured) {
  if (const char* env = std::getenv(kEndpointEnvVar); env != nullptr && *env != '\0') {
    return env;
  }
  return configured;
}

std::string encode_float32_image(const Image& values) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(static_cast<std::size_t>(values.size()) * 4);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values(r, c)));
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  return base64::encode(bytes);
}

Image decode_float32_image(std::string_view b64, int width, int height) {
  if (width <= 0 || height <= 0) throw ProtocolError("image dimensions must be positive");
  const auto bytes = base64::decode(b64);
  if (bytes.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 4) {
    throw ProtocolError("decoded payload size does not match width x height float32");
  }
  Image values(height, width);
  std::size_t k = 0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c, k += 4) {
      const std::uint32_t bits = std::uint32_t(bytes[k]) | (std::uint32_t(bytes[k + 1]) << 8) |
                                 (std::uint32_t(bytes[k + 2]) << 16) |
                                 (std::uint32_t(bytes[k + 3]) << 24);
      values(r, c) = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return values;
}

std::string encode_gradient_request(const GuidanceRequest& request) {
  if (!(request.guidance_scale > 0.0)) {
    throw ContractViolation("guidance request: guidance_scale must be > 0");
  }
  const Image paper = (1.0 - request.image.array()).matrix();
  json body = {
      {"prompt_id", request.prompt_id},
      {"branch_index", request.branch_index},
      {"step", request.step},
      {"guidance_scale", request.guidance_scale},
      {"width", request.image.cols()},
      {"height", request.image.rows()},
      {"pixels_b64", encode_float32_image(paper)},
  };
  return body.dump();
}

namespace {

json parse_body(std::string_view body) {
  json parsed = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw ProtocolError("response body is not a JSON object");
  }
  return parsed;
}

template <typename T>
T require_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ProtocolError(std::string("response missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ProtocolError(std::string("response field '") + key + "' has the wrong type");
  }
}

std::vector<double> require_scores(const json& obj, const char* key, std::size_t count) {
  auto values = require_field<std::vector<double>>(obj, key);
  if (values.size() != count) {
    throw ProtocolError(std::string("score field '") + key + "' has the wrong length");
  }
  return values;
}

template <typename Send>
std::string send_with_retry(const Endpoint& endpoint, const std::string& path, Send&& send) {
  httplib::Client client(endpoint.url);
  client.set_connection_timeout(endpoint.timeout);
  client.set_read_timeout(endpoint.timeout);
  client.set_write_timeout(endpoint.timeout);

  auto backoff = endpoint.retry.initial_backoff;
  std::string last_error = "no attempt made";
  const int attempts = std::max(1, endpoint.retry.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto result = send(client);
    if (result) {
      if (result->status == 200) return result->body;
      if (result->status < 500) {
        throw ProtocolError(endpoint.url + path + " answered HTTP " +
                            std::to_string(result->status) + ": " + result->body);
      }
      last_error = "HTTP " + std::to_string(result->status);
    } else {
      last_error = httplib::to_string(result.error());
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(endpoint.retry.max_backoff,
                         std::chrono::milliseconds(static_cast<std::int64_t>(
                             static_cast<double>(backoff.count()) * endpoint.retry.multiplier)));
    }
  }
  throw TransportError("guidance sidecar at " + endpoint.url + " unreachable after " +
                       std::to_string(attempts) + " attempts: " + last_error);
}

std::string post_with_retry(const Endpoint& endpoint, const std::string& path,
                            const std::string& body) {
  return send_with_retry(endpoint, path, [&](httplib::Client& client) {
    return client.Post(path, body, "application/json");
  });
}

}  // namespace

GuidanceResponse decode_gradient_response(std::string_view body, int width, int height) {
  const json parsed = parse_body(body);
  const auto grad_b64 = require_field<std::string>(parsed, "grad_b64");
  GuidanceResponse response;
  // The sidecar differentiates w.r.t. the paper value (1 - ink).
  response.grad_image = -decode_float32_image(grad_b64, width, height);
  if (!response.grad_image.allFinite()) throw ProtocolError("gradient contains NaN or Inf");
  response.scalar_diag = require_field<double>(parsed, "scalar_diag");
  response.provider_info = require_field<std::string>(parsed, "provider_info");
  return response;
}

GuidanceResponse remote_gradient(const GuidanceRequest& request, const Endpoint& endpoint) {
  const std::string body = encode_gradient_request(request);
  const std::string reply = post_with_retry(endpoint, "/v1/gradient", body);
  return decode_gradient_response(reply, static_cast<int>(request.image.cols()),
                                  static_cast<int>(request.image.rows()));
}

std::string encode_score_request(const Image& ink, std::span<const std::string> prompts) {
  const Image paper = (1.0 - ink.array()).matrix();
  json body = {
      {"pixels_b64", encode_float32_image(paper)},
      {"width", ink.cols()},
      {"height", ink.rows()},
      {"prompts", std::vector<std::string>(prompts.begin(), prompts.end())},
  };
  return body.dump();
}

ScoreResponse decode_score_response(std::string_view body, std::size_t prompt_count) {
  const json parsed = parse_body(body);
  ScoreResponse scores;
  scores.clip = require_scores(parsed, "clip", prompt_count);
  scores.image_reward = require_scores(parsed, "image_reward", prompt_count);
  scores.hps = require_scores(parsed, "hps", prompt_count);
  return scores;
}

ScoreResponse remote_score(const Image& ink, std::span<const std::string> prompts,
                           const Endpoint& endpoint) {
  const std::string reply =
      post_with_retry(endpoint, "/v1/score", encode_score_request(ink, prompts));
  return decode_score_response(reply, prompts.size());
}

HealthStatus remote_health(const Endpoint& endpoint) {
  const json parsed = parse_body(send_with_retry(
      endpoint, "/v1/health", [](httplib::Client& client) { return client.Get("/v1/health"); }));
  return {require_field<std::string>(parsed, "status"), require_field<std::string>(parsed, "mode")};
}

}  // namespace strokeshift
