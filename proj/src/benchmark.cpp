#include "synood/benchmark.hpp"

#include "synood/errors.hpp"
#include "synood/hashing.hpp"
#include "synood/io.hpp"
#include "synood/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace synood {

void SyntheticSpec::validate() const {
  if (feature_dim < 2) throw ArgumentError("feature_dim must be >= 2");
  if (n_id < 1 || n_ood < 1) throw ArgumentError("n_id and n_ood must be >= 1");
  if (!(separation >= 0.0)) throw ArgumentError("separation must be >= 0");
  if (!(scale > 0.0)) throw ArgumentError("scale must be > 0");
  if (!(base_norm >= 0.0)) throw ArgumentError("base_norm must be >= 0");
  if (!(contamination >= 0.0 && contamination <= 1.0)) throw ArgumentError("contamination must be in [0, 1]");
}

namespace {

using Vec = std::vector<double>;

struct Geometry {
  Vec id_mean;
  Vec ood_mean;
};

Vec random_unit(Rng& rng, std::size_t d) {
  Vec v(d);
  double norm = 0.0;
  do {
    for (auto& x : v) x = rng.normal();
    norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  } while (norm < 1e-6);
  for (auto& x : v) x /= norm;
  return v;
}

Geometry make_geometry(const SyntheticSpec& spec) {
  Rng rng(derive_seed({spec.seed, 0x67656f6dULL}));
  const std::size_t d = spec.feature_dim;
  const Vec b = random_unit(rng, d);
  Vec u = random_unit(rng, d);
  const double proj = std::inner_product(u.begin(), u.end(), b.begin(), 0.0);
  double norm = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    u[i] -= proj * b[i];
    norm += u[i] * u[i];
  }
  norm = std::sqrt(norm);
  for (auto& x : u) x /= norm;
  Geometry g{Vec(d), Vec(d)};
  const double half = spec.separation * spec.scale / 2.0;
  for (std::size_t i = 0; i < d; ++i) {
    g.id_mean[i] = spec.base_norm * b[i] + half * u[i];
    g.ood_mean[i] = spec.base_norm * b[i] - half * u[i];
  }
  return g;
}

Vec sample(Rng& rng, const Vec& mean, double scale) {
  Vec v(mean.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = mean[i] + scale * rng.normal();
  return v;
}

std::vector<float> to_float(const Vec& v) { return {v.begin(), v.end()}; }

double cosine(const Vec& a, const Vec& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

// Similarity is measured on the stored f32 vectors, which is what the filter sees.
double stored_cosine(const Vec& a, const Vec& b) {
  const auto fa = to_float(a), fb = to_float(b);
  return cosine(Vec(fa.begin(), fa.end()), Vec(fb.begin(), fb.end()));
}

constexpr double kCleanLow = 0.45, kCleanHigh = 0.85, kContaminatedLow = 0.95;
constexpr int kMaxDraws = 10000;

}  // namespace

FeatureWorld generate_feature_world(const SyntheticSpec& spec) {
  spec.validate();
  const auto geo = make_geometry(spec);
  FeatureWorld world;
  world.dim = spec.feature_dim;

  Rng id_rng(derive_seed({spec.seed, 0x6964ULL}));
  std::vector<Vec> id_vectors;
  for (std::size_t i = 0; i < spec.n_id; ++i) {
    id_vectors.push_back(sample(id_rng, geo.id_mean, spec.scale));
    FeatureRecord r;
    r.record_id = i;
    r.image_id = i;
    r.box = {0, 0, 1, 1};
    r.kind = FeatureKind::id;
    r.vector = to_float(id_vectors.back());
    world.id_records.push_back(std::move(r));
  }

  // Exactly round(c * n_ood) contaminated pairs, at seeded positions.
  const auto n_bad = static_cast<std::size_t>(std::llround(spec.contamination * double(spec.n_ood)));
  std::vector<std::size_t> order(spec.n_ood);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng pick(derive_seed({spec.seed, 0x636f6e74ULL}));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[pick.below(i)]);
  world.contaminated.assign(spec.n_ood, false);
  for (std::size_t k = 0; k < n_bad; ++k) world.contaminated[order[k]] = true;

  Rng ood_rng(derive_seed({spec.seed, 0x6f6f64ULL}));
  for (std::size_t i = 0; i < spec.n_ood; ++i) {
    const std::size_t src = i % spec.n_id;
    const Vec& z_id = id_vectors[src];
    Vec z;
    bool ok = false;
    for (int draw = 0; draw < kMaxDraws && !ok; ++draw) {
      if (world.contaminated[i]) {
        const double a = ood_rng.uniform(0.4, 0.7);
        z = z_id;
        for (auto& x : z) x = a * x + 0.05 * spec.scale * ood_rng.normal();
        ok = stored_cosine(z, z_id) > kContaminatedLow;
      } else {
        z = sample(ood_rng, geo.ood_mean, spec.scale);
        const double c = stored_cosine(z, z_id);
        ok = c >= kCleanLow && c <= kCleanHigh;
      }
    }
    if (!ok) {
      throw ArgumentError("cannot place OOD sample " + std::to_string(i) +
                          " in its similarity band; adjust base_norm or separation");
    }
    FeatureRecord r;
    r.record_id = i;
    r.image_id = spec.n_id + i;
    r.box = {0, 0, 1, 1};
    r.kind = FeatureKind::edit;
    r.vector = to_float(z);
    world.ood_records.push_back(std::move(r));
    world.links.push_back({i, src});
  }
  return world;
}

void write_feature_world(const std::filesystem::path& dir, const FeatureWorld& world) {
  write_feature_archive(dir / "id.synf", world.dim, world.id_records);
  write_feature_archive(dir / "ood.synf", world.dim, world.ood_records);
  std::string lines;
  for (const auto& l : world.links) {
    lines += nlohmann::json{{"edit_id", l.edit_id}, {"source_record_id", l.source_record_id}}.dump() + "\n";
  }
  write_file_atomic(dir / "pairs.jsonl", lines);
}

std::vector<PairLink> read_pair_links(const std::filesystem::path& path) {
  std::vector<PairLink> links;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      links.push_back({j.at("edit_id").get<std::uint64_t>(), j.at("source_record_id").get<std::uint64_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return links;
}

EvalSplit sample_eval_split(const SyntheticSpec& spec, std::size_t n_id, std::size_t n_ood) {
  spec.validate();
  const auto geo = make_geometry(spec);
  Rng rng(derive_seed({spec.seed, 0x6576616cULL}));
  EvalSplit split{FeatureMatrix(Eigen::Index(n_id), spec.feature_dim),
                  FeatureMatrix(Eigen::Index(n_ood), spec.feature_dim)};
  auto fill = [&](FeatureMatrix& m, const Vec& mean) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      // Round through f32 like archived features.
      const auto v = to_float(sample(rng, mean, spec.scale));
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = v[std::size_t(c)];
    }
  };
  fill(split.id, geo.id_mean);
  fill(split.ood, geo.ood_mean);
  return split;
}

EvalReport run_feature_experiment(const FeatureExperiment& experiment) {
  const auto world = generate_feature_world(experiment.world);
  auto pairs = pair_features(world.id_records, world.ood_records, world.links);
  if (experiment.filter) pairs = filter_by_similarity(pairs, *experiment.filter);
  if (pairs.empty()) throw ArgumentError("no OOD samples left for training");
  std::vector<FeatureRecord> ood;
  ood.reserve(pairs.size());
  for (const auto& p : pairs) ood.push_back(p.edit_feature);

  auto config = experiment.train;
  config.seed = experiment.world.seed;
  auto model = init_model(world.dim, config.hidden, config.seed, config.dropout);
  const auto trained = train(std::move(model), to_matrix(world.id_records), to_matrix(ood), config);
  const auto split = sample_eval_split(experiment.world, experiment.eval_n_id, experiment.eval_n_ood);
  auto report = evaluate(trained.model, split.id, split.ood);
  report.seed = experiment.world.seed;
  return report;
}

// ---------------------------------------------------------------------------
// Image world

const std::vector<std::string>& image_world_id_labels() {
  static const std::vector<std::string> labels{"person", "car", "dog", "bicycle", "bottle"};
  return labels;
}

const std::vector<std::string>& image_world_ood_labels() {
  static const std::vector<std::string> labels{"giraffe", "kite", "umbrella"};
  return labels;
}

namespace {

constexpr int kSceneWidth = 128;
constexpr int kSceneHeight = 96;

struct Style {
  std::uint8_t r, g, b;
  int pattern;  // 0 solid, 1 vertical halves, 2 horizontal bands, 3 checker, 4 ring
};

Style label_style(const std::string& label) {
  static const std::vector<std::pair<std::string, Style>> styles{
      {"person", {200, 60, 60, 1}},  {"car", {40, 90, 200, 2}},   {"dog", {150, 110, 60, 0}},
      {"bicycle", {60, 170, 70, 3}}, {"bottle", {90, 200, 200, 4}}, {"giraffe", {230, 200, 40, 3}},
      {"kite", {220, 60, 200, 2}},   {"umbrella", {30, 30, 30, 1}},
  };
  for (const auto& [name, style] : styles) {
    if (name == label) return style;
  }
  const auto h = fnv1a(label);
  return {std::uint8_t(h), std::uint8_t(h >> 8), std::uint8_t(h >> 16), int((h >> 24) % 5)};
}

std::uint8_t shade(std::uint8_t c, int delta) { return std::uint8_t(std::clamp(int(c) + delta, 0, 255)); }

struct Scene {
  Image image;
  Box box;
};

Scene draw_scene(const std::string& label, Rng& rng) {
  Scene s{Image(kSceneWidth, kSceneHeight), {}};
  const int bg_r = 70 + int(rng.below(60)), bg_g = 70 + int(rng.below(60)), bg_b = 70 + int(rng.below(60));
  for (int y = 0; y < kSceneHeight; ++y) {
    for (int x = 0; x < kSceneWidth; ++x) {
      const int n = int(rng.below(21)) - 10;
      auto* p = s.image.pixel(x, y);
      p[0] = shade(std::uint8_t(bg_r), n + y / 8);
      p[1] = shade(std::uint8_t(bg_g), n);
      p[2] = shade(std::uint8_t(bg_b), n - y / 8);
    }
  }
  const int w = 32 + int(rng.below(49));  // 32..80
  const int h = 32 + int(rng.below(33));  // 32..64
  const int x0 = int(rng.below(std::uint64_t(kSceneWidth - w + 1)));
  const int y0 = int(rng.below(std::uint64_t(kSceneHeight - h + 1)));
  const Style st = label_style(label);
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      const int lx = x - x0, ly = y - y0;
      bool alt = false;
      switch (st.pattern) {
        case 1: alt = lx >= w / 2; break;
        case 2: alt = (ly / 6) % 2 == 1; break;
        case 3: alt = ((lx / 8) + (ly / 8)) % 2 == 1; break;
        case 4: {
          const double dx = (lx - w / 2.0) / w, dy = (ly - h / 2.0) / h;
          alt = dx * dx + dy * dy < 0.09;
          break;
        }
        default: break;
      }
      const int n = int(rng.below(11)) - 5;
      const int d = alt ? -60 : 0;
      auto* p = s.image.pixel(x, y);
      p[0] = shade(st.r, d + n);
      p[1] = shade(st.g, d + n);
      p[2] = shade(st.b, d + n);
    }
  }
  s.box = {float(x0), float(y0), float(w), float(h)};
  return s;
}

void write_split(const std::filesystem::path& dir, const std::string& annotation_name, const std::string& image_prefix,
                 std::size_t count, std::uint64_t image_id_base, const std::vector<std::string>& labels,
                 std::uint64_t seed, std::uint64_t stream) {
  nlohmann::json images = nlohmann::json::array(), annotations = nlohmann::json::array(),
                 categories = nlohmann::json::array();
  for (std::size_t c = 0; c < labels.size(); ++c) categories.push_back({{"id", c + 1}, {"name", labels[c]}});
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed({seed, stream, i}));
    const std::size_t label = rng.below(labels.size());
    const auto scene = draw_scene(labels[label], rng);
    const std::uint64_t image_id = image_id_base + i;
    char name[64];
    std::snprintf(name, sizeof name, "images/%s%06zu.png", image_prefix.c_str(), i);
    write_png(dir / name, scene.image);
    images.push_back({{"id", image_id}, {"file_name", name}, {"width", kSceneWidth}, {"height", kSceneHeight}});
    annotations.push_back({{"id", image_id},
                           {"image_id", image_id},
                           {"category_id", label + 1},
                           {"bbox", {scene.box.x, scene.box.y, scene.box.w, scene.box.h}},
                           {"area", double(scene.box.area())},
                           {"iscrowd", 0}});
  }
  const nlohmann::json doc{{"images", images}, {"annotations", annotations}, {"categories", categories}};
  write_file_atomic(dir / annotation_name, doc.dump(1) + "\n");
}

}  // namespace

void generate_image_world(std::size_t n_images, std::uint64_t seed, const std::filesystem::path& dir,
                          std::size_t n_eval) {
  if (n_images < 1) throw ArgumentError("n_images must be >= 1");
  if (n_eval == 0) n_eval = std::max<std::size_t>(10, (n_images + 1) / 2);
  write_split(dir / "train", "annotations.json", "train_", n_images, 1, image_world_id_labels(), seed, 1);
  write_split(dir / "eval", "id.json", "id_", n_eval, 1000000, image_world_id_labels(), seed, 2);
  write_split(dir / "eval", "ood.json", "ood_", n_eval, 2000000, image_world_ood_labels(), seed, 3);
}

std::vector<float> crop_descriptor(const Image& image, const Box& box) {
  const auto cols = pixel_columns(box, image.width);
  const auto rows = pixel_rows(box, image.height);
  if (cols.begin == cols.end || rows.begin == rows.end) {
    throw ArgumentError("descriptor box does not overlap the image");
  }
  std::vector<double> f(kDescriptorDim, 0.0);
  // 2x2 grid of mean colors.
  const int mx = (cols.begin + cols.end) / 2, my = (rows.begin + rows.end) / 2;
  double counts[4] = {0, 0, 0, 0};
  double lum_sum = 0.0, lum_sq = 0.0, gx = 0.0, gy = 0.0;
  for (int y = rows.begin; y < rows.end; ++y) {
    for (int x = cols.begin; x < cols.end; ++x) {
      const auto* p = image.pixel(x, y);
      const int cell = (x >= mx ? 1 : 0) + (y >= my ? 2 : 0);
      for (int c = 0; c < 3; ++c) f[std::size_t(cell * 3 + c)] += p[c] / 255.0;
      counts[cell] += 1.0;
      const double lum = (p[0] + p[1] + p[2]) / 765.0;
      lum_sum += lum;
      lum_sq += lum * lum;
      if (x + 1 < cols.end) {
        const auto* q = image.pixel(x + 1, y);
        gx += std::abs((q[0] + q[1] + q[2]) / 765.0 - lum);
      }
      if (y + 1 < rows.end) {
        const auto* q = image.pixel(x, y + 1);
        gy += std::abs((q[0] + q[1] + q[2]) / 765.0 - lum);
      }
    }
  }
  for (int cell = 0; cell < 4; ++cell) {
    for (int c = 0; c < 3; ++c) {
      auto& v = f[std::size_t(cell * 3 + c)];
      v = counts[cell] > 0 ? v / counts[cell] : 0.0;
    }
  }
  const double n = double(cols.end - cols.begin) * double(rows.end - rows.begin);
  const double mean = lum_sum / n;
  f[12] = std::sqrt(std::max(0.0, lum_sq / n - mean * mean)) * 4.0;
  f[13] = gx / n * 8.0;
  f[14] = gy / n * 8.0;
  f[15] = 0.25;
  return {f.begin(), f.end()};
}

}  // namespace synood
