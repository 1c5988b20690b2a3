#include "synood/mock_backends.hpp"

#include "synood/errors.hpp"
#include "synood/hashing.hpp"
#include "synood/image.hpp"
#include "synood/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace synood {

namespace {

std::uint64_t box_bits(const Box& b) {
  std::uint32_t v[4];
  std::memcpy(&v[0], &b.x, 4);
  std::memcpy(&v[1], &b.y, 4);
  std::memcpy(&v[2], &b.w, 4);
  std::memcpy(&v[3], &b.h, 4);
  return Fnv1a{}.update_u64((std::uint64_t{v[0]} << 32) | v[1]).update_u64((std::uint64_t{v[2]} << 32) | v[3]).digest();
}

std::uint64_t request_key(const ConceptRequest& r) { return fnv1a(to_wire(r).dump()); }

std::uint64_t request_key(const InpaintRequest& r) {
  return Fnv1a{}.update(r.image_png).update_u64(box_bits(r.box)).update(r.prompt).update_u64(r.seed).digest();
}

std::uint64_t request_key(const SegmentRequest& r) {
  return Fnv1a{}.update(r.image_png).update_u64(box_bits(r.box_prompt)).digest();
}

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Image decode_request_image(const std::vector<std::uint8_t>& png, int max_side) {
  Image img;
  try {
    img = decode_png(png);
  } catch (const FormatError& e) {
    throw ProtocolError(std::string("image is not a valid PNG: ") + e.what());
  }
  if (img.width > max_side || img.height > max_side) {
    throw ProtocolError("image size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " exceeds the supported maximum of " + std::to_string(max_side));
  }
  return img;
}

}  // namespace

MockWorld MockWorld::with_defaults(std::uint64_t seed) {
  MockWorld w;
  w.seed = seed;
  w.concept_tables = {
      {"person", {"mannequin", "sculpture", "scarecrows", "doll", "puppet"}},
      {"car", {"golf cart", "go-kart", "tractor", "rickshaw", "snowmobile", "forklift"}},
      {"dog", {"fox", "wolf", "raccoon", "plush toy", "coyote", "hyena"}},
      {"bicycle", {"unicycle", "scooter", "wheelchair", "stroller", "tricycle"}},
      {"bottle", {"vase", "candle", "thermos", "lantern", "flask", "spray can"}},
      {"chair", {"stool", "bench", "ottoman", "crate", "hammock"}},
      {"boat", {"raft", "canoe", "buoy", "kayak", "gondola", "pontoon"}},
  };
  return w;
}

std::vector<std::string> mock_concept_table(const MockWorld& world, const std::string& label) {
  if (auto it = world.concept_tables.find(label); it != world.concept_tables.end() && !it->second.empty()) {
    return it->second;
  }
  return {"toy " + label,      label + " statue",    label + " figurine", label + " replica",
          "inflatable " + label, "cardboard " + label, label + " poster",   label + " sketch"};
}

ConceptResponse MockConceptBackend::concepts(const ConceptRequest& request) {
  if (request.query_label.empty()) throw ProtocolError("field 'query_label' must be non-empty");
  if (request.num == 0) throw ProtocolError("field 'num' must be >= 1");
  Rng rng(derive_seed({world_.seed, request_key(request), 1}));
  if (rng.uniform() < world_.concept_failure_rate) throw TransportError("mock concept backend unavailable");
  const auto table = mock_concept_table(world_, request.query_label);
  ConceptResponse resp;
  const std::size_t start = static_cast<std::size_t>(request.attempt) * request.num;
  for (std::size_t k = 0; k < request.num; ++k) resp.concepts.push_back(table[(start + k) % table.size()]);
  return resp;
}

InpaintResponse MockInpaintBackend::inpaint(const InpaintRequest& request) {
  Image img = decode_request_image(request.image_png, world_.max_image_side);
  if (!fits_within(request.box, img.width, img.height)) throw ProtocolError("field 'box' lies outside the image");
  Rng rng(derive_seed({world_.seed, request_key(request), 2}));
  if (rng.uniform() < world_.inpaint_failure_rate) throw TransportError("mock inpaint backend unavailable");

  // The concept decides the object's look; the seed decides the texture around it.
  Rng look(derive_seed({fnv1a(request.prompt), 3}));
  const double obj[3] = {look.uniform(30, 230), look.uniform(30, 230), look.uniform(30, 230)};
  const double stripe_freq = look.uniform(0.15, 0.9);
  const double stripe_amp = look.uniform(10, 45);
  const double bg[3] = {rng.uniform(60, 200), rng.uniform(60, 200), rng.uniform(60, 200)};
  const double tint = rng.uniform(-15, 15);

  const auto cols = pixel_columns(request.box, img.width);
  const auto rows = pixel_rows(request.box, img.height);
  const double bw = cols.end - cols.begin, bh = rows.end - rows.begin;
  const double cx = cols.begin + bw / 2 + rng.uniform(-1, 1) * world_.blob_jitter * bw / 2;
  const double cy = rows.begin + bh / 2 + rng.uniform(-1, 1) * world_.blob_jitter * bh / 2;
  const double rx = std::max(1.0, bw / 2 * (1.0 - world_.blob_jitter * rng.uniform()));
  const double ry = std::max(1.0, bh / 2 * (1.0 - world_.blob_jitter * rng.uniform()));

  for (int y = rows.begin; y < rows.end; ++y) {
    for (int x = cols.begin; x < cols.end; ++x) {
      auto* p = img.pixel(x, y);
      const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
      const double noise = rng.uniform(-12, 12);
      if (dx * dx + dy * dy <= 1.0) {
        const double stripe = stripe_amp * std::sin(stripe_freq * (x + y));
        for (int c = 0; c < 3; ++c) p[c] = clamp_byte(obj[c] + tint + stripe + noise);
      } else {
        for (int c = 0; c < 3; ++c) p[c] = clamp_byte(bg[c] + noise);
      }
    }
  }
  if (world_.context_drift) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        if (x >= cols.begin && x < cols.end && y >= rows.begin && y < rows.end) continue;
        if (rng.uniform() < 0.05) {
          auto* p = img.pixel(x, y);
          p[0] = clamp_byte(p[0] + (rng.uniform() < 0.5 ? -1 : 1));
        }
      }
    }
  }
  return {encode_png(img)};
}

SegmentResponse MockSegmentBackend::segment(const SegmentRequest& request) {
  const Image img = decode_request_image(request.image_png, world_.max_image_side);
  const Box& b = request.box_prompt;
  if (!fits_within(b, img.width, img.height)) throw ProtocolError("field 'box_prompt' lies outside the image");
  Rng rng(derive_seed({world_.seed, request_key(request), 4}));
  if (rng.uniform() < world_.segment_failure_rate) return {};

  // Independent per-side draws; the result grows monotonically with the jitter.
  const double j = world_.segment_jitter;
  const double u[4] = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
  const double x0 = std::max(0.0, std::floor(b.x - j * u[0] * b.w));
  const double x1 = std::min<double>(img.width, std::ceil(b.right() + j * u[1] * b.w));
  const double y0 = std::max(0.0, std::floor(b.y - j * u[2] * b.h));
  const double y1 = std::min<double>(img.height, std::ceil(b.bottom() + j * u[3] * b.h));
  const Box main_box{float(x0), float(y0), float(x1 - x0), float(y1 - y0)};
  const double score = 0.75 + 0.2 * rng.uniform();

  SegmentResponse resp;
  resp.masks.push_back({box_to_mask(main_box, img.width, img.height), score});
  // A lower-confidence part mask, as real segmenters return several hypotheses.
  const Box part{float(std::floor(x0 + (x1 - x0) / 4)), float(std::floor(y0 + (y1 - y0) / 4)),
                 float(std::max(1.0, std::floor((x1 - x0) / 2))), float(std::max(1.0, std::floor((y1 - y0) / 2)))};
  resp.masks.push_back({box_to_mask(part, img.width, img.height), score * 0.8});
  return resp;
}

}  // namespace synood
