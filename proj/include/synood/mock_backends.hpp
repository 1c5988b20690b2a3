#pragma once

#include "synood/backends.hpp"

#include <map>
#include <string>
#include <vector>

namespace synood {

/// Knobs for the deterministic offline backends. Every mock output is a pure
/// function of (seed, request bytes).
struct MockWorld {
  std::uint64_t seed = 0;
  /// Concept table per label; labels without an entry get generic variants.
  std::map<std::string, std::vector<std::string>> concept_tables;
  double concept_failure_rate = 0.0;
  double inpaint_failure_rate = 0.0;
  /// Largest accepted image side; bigger images are rejected as a protocol error.
  int max_image_side = 4096;
  /// Blob extent perturbation relative to the box, in [0, 1).
  double blob_jitter = 0.15;
  /// Perturb a few pixels outside the box, as real inpainting round trips do.
  bool context_drift = true;
  /// Mask box grows each side by up to jitter * box size.
  double segment_jitter = 0.0;
  /// Probability of answering with no masks.
  double segment_failure_rate = 0.0;

  static MockWorld with_defaults(std::uint64_t seed);
};

/// Concept table the mock uses for `label`.
std::vector<std::string> mock_concept_table(const MockWorld& world, const std::string& label);

class MockConceptBackend final : public ConceptBackend {
 public:
  explicit MockConceptBackend(MockWorld world) : world_(std::move(world)) {}
  ConceptResponse concepts(const ConceptRequest& request) override;

 private:
  MockWorld world_;
};

class MockInpaintBackend final : public InpaintBackend {
 public:
  explicit MockInpaintBackend(MockWorld world) : world_(std::move(world)) {}
  InpaintResponse inpaint(const InpaintRequest& request) override;

 private:
  MockWorld world_;
};

class MockSegmentBackend final : public SegmentBackend {
 public:
  explicit MockSegmentBackend(MockWorld world) : world_(std::move(world)) {}
  SegmentResponse segment(const SegmentRequest& request) override;

 private:
  MockWorld world_;
};

}  // namespace synood
