#include "synood/features.hpp"

#include "synood/errors.hpp"
#include "synood/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace synood {

namespace {

constexpr char kMagic[4] = {'S', 'Y', 'N', 'F'};
constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 8;
constexpr std::size_t kRecordFixedSize = 8 + 8 + 16 + 4 + 1 + 3;

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  bool has(std::size_t n) const { return in_.size() - pos_ >= n; }
  std::uint8_t u8() { return in_[pos_++]; }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_++]} << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_feature_archive(std::uint32_t dim, std::span<const FeatureRecord> records) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + records.size() * (kRecordFixedSize + 4 * dim));
  Writer w(out);
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kFeatureArchiveVersion);
  w.u32(dim);
  w.u64(records.size());
  for (const auto& r : records) {
    if (r.vector.size() != dim) {
      throw ArgumentError("feature record " + std::to_string(r.record_id) + " has dimension " +
                          std::to_string(r.vector.size()) + ", archive dimension is " + std::to_string(dim));
    }
    w.u64(r.record_id);
    w.u64(r.image_id);
    w.f32(r.box.x);
    w.f32(r.box.y);
    w.f32(r.box.w);
    w.f32(r.box.h);
    w.u32(r.label_id);
    w.u8(static_cast<std::uint8_t>(r.kind));
    w.u8(0);
    w.u8(0);
    w.u8(0);
    for (float v : r.vector) w.f32(v);
  }
  return out;
}

std::vector<FeatureRecord> decode_feature_archive(std::span<const std::uint8_t> bytes, std::uint32_t* dim_out) {
  Reader r(bytes);
  if (!r.has(kHeaderSize) || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a feature archive (bad magic)", 0);
  }
  for (int i = 0; i < 4; ++i) r.u8();
  const auto version = r.u32();
  if (version != kFeatureArchiveVersion) {
    throw FormatError("unsupported feature archive version " + std::to_string(version), 4);
  }
  const auto dim = r.u32();
  const auto count = r.u64();
  if (dim_out) *dim_out = dim;

  const std::size_t record_size = kRecordFixedSize + 4 * std::size_t{dim};
  std::vector<FeatureRecord> out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, bytes.size() / record_size + 1)));
  for (std::uint64_t i = 0; i < count; ++i) {
    if (!r.has(record_size)) throw CorruptionError("feature archive is truncated", static_cast<std::size_t>(i));
    FeatureRecord rec;
    rec.record_id = r.u64();
    rec.image_id = r.u64();
    rec.box.x = r.f32();
    rec.box.y = r.f32();
    rec.box.w = r.f32();
    rec.box.h = r.f32();
    rec.label_id = r.u32();
    const auto kind = r.u8();
    if (kind > 1) throw CorruptionError("invalid feature kind " + std::to_string(kind), static_cast<std::size_t>(i));
    rec.kind = static_cast<FeatureKind>(kind);
    r.u8();
    r.u8();
    r.u8();
    rec.vector.resize(dim);
    for (auto& v : rec.vector) {
      v = r.f32();
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite value in feature record " + std::to_string(rec.record_id) + " (index " +
                                  std::to_string(i) + ")",
                              {rec.record_id});
      }
    }
    out.push_back(std::move(rec));
  }
  if (r.has(1)) throw CorruptionError("trailing bytes after the last record", static_cast<std::size_t>(count));
  return out;
}

void write_feature_archive(const std::filesystem::path& path, std::uint32_t dim,
                           std::span<const FeatureRecord> records) {
  write_file_atomic(path, encode_feature_archive(dim, records));
}

std::vector<FeatureRecord> read_feature_archive(const std::filesystem::path& path, std::uint32_t* dim) {
  return decode_feature_archive(read_binary_file(path), dim);
}

namespace {
template <class T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ArgumentError("cosine_similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateVectorError("cosine_similarity: zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}
}  // namespace

double cosine_similarity(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine_similarity(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }

std::vector<FeaturePair> pair_features(std::span<const FeatureRecord> id_records,
                                       std::span<const FeatureRecord> edit_records, std::span<const PairLink> links) {
  std::unordered_map<std::uint64_t, const FeatureRecord*> by_id, by_edit;
  std::set<std::uint64_t> duplicate_edits;
  for (const auto& r : id_records) {
    if (r.kind == FeatureKind::id) by_id.emplace(r.record_id, &r);
  }
  for (const auto& r : edit_records) {
    if (r.kind != FeatureKind::edit) continue;
    if (!by_edit.emplace(r.record_id, &r).second) duplicate_edits.insert(r.record_id);
  }
  std::vector<std::uint64_t> problems;
  std::vector<FeaturePair> out;
  out.reserve(links.size());
  for (const auto& link : links) {
    auto e = by_edit.find(link.edit_id);
    auto i = by_id.find(link.source_record_id);
    if (e == by_edit.end() || i == by_id.end() || duplicate_edits.count(link.edit_id)) {
      problems.push_back(link.edit_id);
      continue;
    }
    FeaturePair p{*i->second, *e->second, 0.0};
    p.similarity = cosine_similarity(std::span<const float>(p.edit_feature.vector),
                                     std::span<const float>(p.id_feature.vector));
    out.push_back(std::move(p));
  }
  if (!problems.empty()) {
    std::ostringstream os;
    os << "missing or duplicate features for edits:";
    for (auto id : problems) os << ' ' << id;
    throw PairingError(os.str(), std::move(problems));
  }
  return out;
}

std::vector<PairLink> refined_links(std::span<const EditRecord> edits) {
  std::vector<PairLink> links;
  for (const auto& e : edits) {
    if (e.status == EditStatus::refined) links.push_back({e.job.job_id, e.job.source.record_id});
  }
  return links;
}

std::vector<FeaturePair> pair_features(std::span<const FeatureRecord> id_records,
                                       std::span<const FeatureRecord> edit_records,
                                       std::span<const EditRecord> edits) {
  const auto links = refined_links(edits);
  return pair_features(id_records, edit_records, links);
}

void FilterConfig::validate() const {
  if (!(eps_low >= -1.0 && eps_low < eps_up && eps_up <= 1.0)) {
    throw ArgumentError("similarity thresholds must satisfy -1 <= eps_low < eps_up <= 1");
  }
}

std::vector<FeaturePair> filter_by_similarity(std::span<const FeaturePair> pairs, const FilterConfig& config) {
  config.validate();
  std::vector<FeaturePair> out;
  for (const auto& p : pairs) {
    if (config.eps_low < p.similarity && p.similarity < config.eps_up) out.push_back(p);
  }
  return out;
}

void mark_similarity_status(std::vector<EditRecord>& edits, std::span<const FeaturePair> kept) {
  std::set<std::uint64_t> keep;
  for (const auto& p : kept) keep.insert(p.edit_feature.record_id);
  for (auto& e : edits) {
    if (e.status != EditStatus::refined) continue;
    if (keep.count(e.job.job_id)) {
      e.status = EditStatus::accepted;
    } else {
      e.status = EditStatus::sim_rejected;
      e.reason = "similarity_out_of_range";
    }
  }
}

FeatureMatrix to_matrix(std::span<const FeatureRecord> records) {
  if (records.empty()) return FeatureMatrix(0, 0);
  const auto d = records.front().vector.size();
  FeatureMatrix m(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].vector.size() != d) throw ArgumentError("feature records have mixed dimensions");
    for (std::size_t k = 0; k < d; ++k) m(Eigen::Index(i), Eigen::Index(k)) = records[i].vector[k];
  }
  return m;
}

}  // namespace synood
