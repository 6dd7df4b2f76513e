#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strokeshift/raster.hpp"

namespace strokeshift {

using Image = InkImage<double>;

struct GuidanceRequest {
  std::size_t branch_index = 0;
  std::int64_t step = 0;
  std::string prompt_id;
  /// Ink convention; the remote client converts to 1 - ink on the wire.
  Image image;
  double guidance_scale = 100.0;
};

struct GuidanceResponse {
  /// d loss / d ink, same shape as the request image.
  Image grad_image;
  double scalar_diag = 0.0;
  std::string provider_info;
};

/// Source of the image-space semantic gradient for one branch render.
/// Implementations must tolerate concurrent calls from different branches.
class GuidanceProvider {
 public:
  virtual ~GuidanceProvider() = default;
  virtual GuidanceResponse gradient(const GuidanceRequest& request) = 0;
};

/// Prompt id -> provider. Several ids may share one provider.
using ProviderMap = std::map<std::string, std::shared_ptr<GuidanceProvider>>;

/// loss = mean((image - target)^2); grad = 2 (image - target) / pixel_count.
GuidanceResponse target_match_gradient(const Image& image, const Image& target);

/// Local stand-in for SDS: pulls the render toward a fixed ink image.
class TargetMatchProvider final : public GuidanceProvider {
 public:
  explicit TargetMatchProvider(Image target) : target_(std::move(target)) {}
  GuidanceResponse gradient(const GuidanceRequest& request) override;
  const Image& target() const { return target_; }

 private:
  Image target_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};
};

struct Endpoint {
  /// Base URL, e.g. "http://127.0.0.1:8765".
  std::string url;
  std::chrono::seconds timeout{300};
  RetryPolicy retry;
};

/// Environment variable that overrides a configured sidecar URL.
inline constexpr const char* kEndpointEnvVar = "STROKESHIFT_ENDPOINT";

/// `configured` unless kEndpointEnvVar is set and non-empty.
std::string resolve_endpoint_url(const std::string& configured);

// Wire format helpers. Pixels travel as base64 of row-major float32 little-endian.

std::string encode_float32_image(const Image& values);
Image decode_float32_image(std::string_view b64, int width, int height);

/// JSON body for POST /v1/gradient.
std::string encode_gradient_request(const GuidanceRequest& request);
/// Parses a /v1/gradient response body into ink convention. Throws ProtocolError.
GuidanceResponse decode_gradient_response(std::string_view body, int width, int height);

GuidanceResponse remote_gradient(const GuidanceRequest& request, const Endpoint& endpoint);

class RemoteGuidanceProvider final : public GuidanceProvider {
 public:
  explicit RemoteGuidanceProvider(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
  GuidanceResponse gradient(const GuidanceRequest& request) override {
    return remote_gradient(request, endpoint_);
  }

 private:
  Endpoint endpoint_;
};

/// Per-prompt scores for one image, as served by POST /v1/score.
struct ScoreResponse {
  std::vector<double> clip;
  std::vector<double> image_reward;
  std::vector<double> hps;
};

std::string encode_score_request(const Image& ink, std::span<const std::string> prompts);
ScoreResponse decode_score_response(std::string_view body, std::size_t prompt_count);
ScoreResponse remote_score(const Image& ink, std::span<const std::string> prompts,
                           const Endpoint& endpoint);

struct HealthStatus {
  std::string status;
  std::string mode;
};

HealthStatus remote_health(const Endpoint& endpoint);

}  // namespace strokeshift
