#pragma once

#include "synood/geometry.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace synood {

// ---- Request/response types shared by every backend implementation ----

struct ConceptRequest {
  std::vector<std::string> id_labels;
  std::string query_label;
  std::uint32_t num = 0;
  /// 0-based request counter; a fresh attempt asks for different concepts.
  std::uint32_t attempt = 0;
  /// Rendered in-context prompt.
  std::string prompt;
};

struct ConceptResponse {
  std::vector<std::string> concepts;
};

struct InpaintRequest {
  std::vector<std::uint8_t> image_png;
  Box box;
  std::string prompt;
  std::uint64_t seed = 0;
};

struct InpaintResponse {
  std::vector<std::uint8_t> image_png;
};

struct SegmentRequest {
  std::vector<std::uint8_t> image_png;
  Box box_prompt;
};

struct ScoredMask {
  Mask mask;
  double score = 0.0;
};

struct SegmentResponse {
  std::vector<ScoredMask> masks;
};

// ---- Backend roles ----
// Implementations must be safe to call concurrently.

class ConceptBackend {
 public:
  virtual ~ConceptBackend() = default;
  virtual ConceptResponse concepts(const ConceptRequest& request) = 0;
};

class InpaintBackend {
 public:
  virtual ~InpaintBackend() = default;
  virtual InpaintResponse inpaint(const InpaintRequest& request) = 0;
};

class SegmentBackend {
 public:
  virtual ~SegmentBackend() = default;
  virtual SegmentResponse segment(const SegmentRequest& request) = 0;
};

// ---- Wire format (JSON bodies of POST /v1/{concepts,inpaint,segment}) ----
// Decoders throw ProtocolError naming the offending field.

nlohmann::json to_wire(const ConceptRequest& r);
nlohmann::json to_wire(const ConceptResponse& r);
nlohmann::json to_wire(const InpaintRequest& r);
nlohmann::json to_wire(const InpaintResponse& r);
nlohmann::json to_wire(const SegmentRequest& r);
nlohmann::json to_wire(const SegmentResponse& r);

ConceptRequest concept_request_from_wire(const nlohmann::json& j);
ConceptResponse concept_response_from_wire(const nlohmann::json& j);
InpaintRequest inpaint_request_from_wire(const nlohmann::json& j);
InpaintResponse inpaint_response_from_wire(const nlohmann::json& j);
SegmentRequest segment_request_from_wire(const nlohmann::json& j);
SegmentResponse segment_response_from_wire(const nlohmann::json& j);

nlohmann::json mask_to_wire(const Mask& m);
Mask mask_from_wire(const nlohmann::json& j);

/// Error body: {"code": ..., "message": ...}.
nlohmann::json error_body(const std::string& code, const std::string& message);

// ---- HTTP transport ----

struct BackendEndpointConfig {
  std::string base_url;
  double timeout_s = 60.0;
  std::size_t retry_budget = 3;
  /// Name of the environment variable holding a bearer token; empty for none.
  std::string auth_token_env;
  double backoff_base_s = 0.5;
  double backoff_factor = 2.0;
  std::uint64_t jitter_seed = 0;

  void validate() const;
};

/// Delay before retry number `retry` (0-based): base * factor^retry * (0.5 + 0.5u),
/// u drawn from (jitter_seed, retry).
std::chrono::duration<double> backoff_delay(const BackendEndpointConfig& cfg, std::size_t retry);

/// JSON-over-HTTP client for the three endpoints. Transport failures are retried
/// up to retry_budget times with backoff; protocol failures are returned at once.
class HttpBackend final : public ConceptBackend, public InpaintBackend, public SegmentBackend {
 public:
  using Sleeper = std::function<void(std::chrono::duration<double>)>;

  explicit HttpBackend(BackendEndpointConfig config, Sleeper sleeper = {});

  ConceptResponse concepts(const ConceptRequest& request) override;
  InpaintResponse inpaint(const InpaintRequest& request) override;
  SegmentResponse segment(const SegmentRequest& request) override;

  /// Number of HTTP requests issued so far (including retries).
  std::size_t requests_sent() const noexcept;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);

  BackendEndpointConfig config_;
  Sleeper sleeper_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string auth_header_;
  std::shared_ptr<std::atomic<std::size_t>> sent_;
};

}  // namespace synood
