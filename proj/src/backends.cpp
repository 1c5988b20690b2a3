#include "synood/backends.hpp"

#include "synood/errors.hpp"
#include "synood/hashing.hpp"
#include "synood/image.hpp"
#include "synood/random.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

using nlohmann::json;

namespace synood {

namespace {

const json& field(const json& j, const char* name) {
  if (!j.is_object()) throw ProtocolError("body must be a JSON object");
  auto it = j.find(name);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + name + "'");
  return *it;
}

std::string string_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) throw ProtocolError(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::uint64_t uint_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ProtocolError(std::string("field '") + name + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<std::uint8_t> image_field(const json& j, const char* name) {
  try {
    return base64_decode(string_field(j, name));
  } catch (const FormatError& e) {
    throw ProtocolError(std::string("field '") + name + "' is not valid base64: " + e.what());
  }
}

json box_to_wire(const Box& b) { return json::array({b.x, b.y, b.w, b.h}); }

Box box_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_array() || v.size() != 4 ||
      !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
    throw ProtocolError(std::string("field '") + name + "' must be [x, y, w, h]");
  }
  Box b{v[0].get<float>(), v[1].get<float>(), v[2].get<float>(), v[3].get<float>()};
  if (!has_positive_extent(b)) throw ProtocolError(std::string("field '") + name + "' has non-positive extent");
  return b;
}

}  // namespace

json to_wire(const ConceptRequest& r) {
  return {{"id_labels", r.id_labels},
          {"query_label", r.query_label},
          {"num", r.num},
          {"attempt", r.attempt},
          {"prompt", r.prompt}};
}

json to_wire(const ConceptResponse& r) { return {{"concepts", r.concepts}}; }

json to_wire(const InpaintRequest& r) {
  return {{"image", base64_encode(r.image_png)}, {"box", box_to_wire(r.box)}, {"prompt", r.prompt}, {"seed", r.seed}};
}

json to_wire(const InpaintResponse& r) { return {{"image", base64_encode(r.image_png)}}; }

json to_wire(const SegmentRequest& r) {
  return {{"image", base64_encode(r.image_png)}, {"box_prompt", box_to_wire(r.box_prompt)}};
}

json mask_to_wire(const Mask& m) { return {{"size", {m.height, m.width}}, {"counts", m.runs}}; }

Mask mask_from_wire(const json& j) {
  const auto& size = field(j, "size");
  const auto& counts = field(j, "counts");
  if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() || !size[1].is_number_integer()) {
    throw ProtocolError("field 'rle.size' must be [height, width]");
  }
  if (!counts.is_array()) throw ProtocolError("field 'rle.counts' must be an array");
  Mask m;
  m.height = size[0].get<int>();
  m.width = size[1].get<int>();
  m.runs.reserve(counts.size());
  for (const auto& c : counts) {
    if (!c.is_number_unsigned() && !(c.is_number_integer() && c.get<std::int64_t>() >= 0)) {
      throw ProtocolError("field 'rle.counts' must hold non-negative integers");
    }
    m.runs.push_back(c.get<std::uint32_t>());
  }
  try {
    validate_mask(m);
  } catch (const ArgumentError& e) {
    throw ProtocolError(std::string("field 'rle': ") + e.what());
  }
  return m;
}

json to_wire(const SegmentResponse& r) {
  json masks = json::array();
  for (const auto& m : r.masks) masks.push_back({{"rle", mask_to_wire(m.mask)}, {"score", m.score}});
  return {{"masks", masks}};
}

ConceptRequest concept_request_from_wire(const json& j) {
  ConceptRequest r;
  const auto& labels = field(j, "id_labels");
  if (!labels.is_array()) throw ProtocolError("field 'id_labels' must be an array of strings");
  for (const auto& l : labels) {
    if (!l.is_string()) throw ProtocolError("field 'id_labels' must be an array of strings");
    r.id_labels.push_back(l.get<std::string>());
  }
  r.query_label = string_field(j, "query_label");
  if (r.query_label.empty()) throw ProtocolError("field 'query_label' must be non-empty");
  r.num = static_cast<std::uint32_t>(uint_field(j, "num"));
  if (r.num == 0) throw ProtocolError("field 'num' must be >= 1");
  if (j.contains("attempt")) r.attempt = static_cast<std::uint32_t>(uint_field(j, "attempt"));
  if (j.contains("prompt")) r.prompt = string_field(j, "prompt");
  return r;
}

ConceptResponse concept_response_from_wire(const json& j) {
  const auto& list = field(j, "concepts");
  if (!list.is_array()) throw ProtocolError("field 'concepts' must be an array of strings");
  ConceptResponse r;
  for (const auto& c : list) {
    if (!c.is_string()) throw ProtocolError("field 'concepts' must be an array of strings");
    r.concepts.push_back(c.get<std::string>());
  }
  return r;
}

InpaintRequest inpaint_request_from_wire(const json& j) {
  InpaintRequest r;
  r.image_png = image_field(j, "image");
  r.box = box_field(j, "box");
  r.prompt = string_field(j, "prompt");
  r.seed = uint_field(j, "seed");
  return r;
}

InpaintResponse inpaint_response_from_wire(const json& j) { return {image_field(j, "image")}; }

SegmentRequest segment_request_from_wire(const json& j) {
  SegmentRequest r;
  r.image_png = image_field(j, "image");
  r.box_prompt = box_field(j, "box_prompt");
  return r;
}

SegmentResponse segment_response_from_wire(const json& j) {
  const auto& list = field(j, "masks");
  if (!list.is_array()) throw ProtocolError("field 'masks' must be an array");
  SegmentResponse r;
  for (const auto& m : list) {
    const auto& score = field(m, "score");
    if (!score.is_number()) throw ProtocolError("field 'masks[].score' must be a number");
    const double s = score.get<double>();
    if (!(s >= 0.0 && s <= 1.0)) throw ProtocolError("field 'masks[].score' must be in [0, 1]");
    r.masks.push_back({mask_from_wire(field(m, "rle")), s});
  }
  return r;
}

json error_body(const std::string& code, const std::string& message) {
  return {{"code", code}, {"message", message}};
}

// ---- HTTP client ----

void BackendEndpointConfig::validate() const {
  if (base_url.empty()) throw ArgumentError("backend base_url must be set");
  if (!(timeout_s > 0.0)) throw ArgumentError("backend timeout must be > 0");
  if (!(backoff_base_s >= 0.0) || !(backoff_factor >= 1.0)) throw ArgumentError("invalid backoff settings");
}

std::chrono::duration<double> backoff_delay(const BackendEndpointConfig& cfg, std::size_t retry) {
  Rng rng(derive_seed({cfg.jitter_seed, retry, 0x6261636b6f6666ULL}));
  const double u = rng.uniform();
  return std::chrono::duration<double>(cfg.backoff_base_s * std::pow(cfg.backoff_factor, double(retry)) *
                                       (0.5 + 0.5 * u));
}

HttpBackend::HttpBackend(BackendEndpointConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)), sent_(std::make_shared<std::atomic<std::size_t>>(0)) {
  config_.validate();
  if (!sleeper_) sleeper_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
  // Split "http://host:port/prefix" into the client target and the path prefix.
  const auto scheme_end = config_.base_url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = config_.base_url.find('/', host_start);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  if (path_start != std::string::npos) {
    path_prefix_ = config_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
  if (!config_.auth_token_env.empty()) {
    if (const char* token = std::getenv(config_.auth_token_env.c_str()); token && *token) {
      auth_header_ = std::string("Bearer ") + token;
    }
  }
}

std::size_t HttpBackend::requests_sent() const noexcept { return sent_->load(); }

json HttpBackend::post(const std::string& path, const json& body) {
  // One client per call keeps the backend safe for concurrent use.
  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(config_.timeout_s));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!auth_header_.empty()) headers.emplace("Authorization", auth_header_);

  const std::string payload = body.dump();
  const std::string target = path_prefix_ + path;
  std::string last_error;
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt > 0) sleeper_(backoff_delay(config_, attempt - 1));
    sent_->fetch_add(1);
    auto res = client.Post(target, headers, payload, "application/json");
    if (!res) {
      last_error = "request to " + target + " failed: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw ProtocolError("malformed response body from " + target + ": " + e.what());
      }
    } else {
      std::string detail = res->body;
      try {
        const auto err = json::parse(res->body);
        detail = err.value("code", std::string("?")) + ": " + err.value("message", std::string());
      } catch (const json::exception&) {
      }
      const std::string msg = target + " returned HTTP " + std::to_string(res->status) + " (" + detail + ")";
      const bool retryable = res->status == 429 || (res->status >= 500 && res->status != 501);
      if (!retryable) throw ProtocolError(msg);
      last_error = msg;
    }
    if (attempt >= config_.retry_budget) break;
  }
  throw TransportError(last_error + " after " + std::to_string(config_.retry_budget + 1) + " attempts");
}

ConceptResponse HttpBackend::concepts(const ConceptRequest& request) {
  return concept_response_from_wire(post("/v1/concepts", to_wire(request)));
}

InpaintResponse HttpBackend::inpaint(const InpaintRequest& request) {
  return inpaint_response_from_wire(post("/v1/inpaint", to_wire(request)));
}

SegmentResponse HttpBackend::segment(const SegmentRequest& request) {
  return segment_response_from_wire(post("/v1/segment", to_wire(request)));
}

}  // namespace synood
