#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "sar/adversarial.hpp"
#include "sar/refinement.hpp"
#include "sar/seeding.hpp"

namespace sar {

/// An order-preserving subset of Seeding -> Adversarial -> Refinement.
struct Stages {
  bool seed = false;
  bool adversarial = false;
  bool refine = false;

  /// Accepts `s,a,r` style lists or `S+A+R` names. Stages must appear in
  /// pipeline order, at least one of them.
  static Stages parse(std::string_view text);
  /// `S+A+R` style name.
  std::string name() const;

  friend bool operator==(const Stages&, const Stages&) = default;
};

struct PipelineConfig {
  AdvConfig adversarial;
  RefineConfig refinement;
  /// Seed of the random orthogonal start used when seeding is skipped.
  std::uint64_t init_seed = 1;
};

struct PipelineResult {
  MappingMatrix mapping;
  std::optional<AdversarialResult> adversarial;
  std::optional<RefineResult> refinement;
};

/// Runs the requested stages on unit-normalized copies of the spaces.
PipelineResult run_pipeline(const EmbeddingSpace& source, const EmbeddingSpace& target,
                            const SeedDictionary& seeds, const Stages& stages,
                            const PipelineConfig& cfg, const EpochObserver& observer = {});

}  // namespace sar
