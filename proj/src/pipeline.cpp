#include "sar/pipeline.hpp"

#include <algorithm>
#include <cctype>

#include "sar/error.hpp"

namespace sar {

Stages Stages::parse(std::string_view text) {
  Stages s;
  int last = -1;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    int order;
    if (token == "s" || token == "seed" || token == "seeding") {
      order = 0;
      s.seed = true;
    } else if (token == "a" || token == "adv" || token == "adversarial") {
      order = 1;
      s.adversarial = true;
    } else if (token == "r" || token == "refine" || token == "refinement") {
      order = 2;
      s.refine = true;
    } else {
      throw InputError("unknown stage '" + token + "' (expected s, a or r)");
    }
    if (order <= last) throw InputError("stages must be listed once, in the order s, a, r");
    last = order;
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == '+' || c == ' ') {
      flush();
    } else {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  if (last < 0) throw InputError("no stages given");
  return s;
}

std::string Stages::name() const {
  std::string out;
  auto add = [&](const char* n) {
    if (!out.empty()) out += '+';
    out += n;
  };
  if (seed) add("S");
  if (adversarial) add("A");
  if (refine) add("R");
  return out;
}

PipelineResult run_pipeline(const EmbeddingSpace& source, const EmbeddingSpace& target,
                            const SeedDictionary& seeds, const Stages& stages,
                            const PipelineConfig& cfg, const EpochObserver& observer) {
  if (source.dim() != target.dim()) {
    throw InputError("embedding dimensions differ: " + std::to_string(source.dim()) + " vs " +
                     std::to_string(target.dim()));
  }
  const EmbeddingSpace src = source.normalized();
  const EmbeddingSpace tgt = target.normalized();

  PipelineResult out;
  if (stages.seed) {
    out.mapping = seeded_mapping(seeds, src, tgt);
  } else {
    out.mapping = MappingMatrix{random_orthogonal(src.dim(), cfg.init_seed), Stage::seeded, true};
  }
  if (stages.adversarial) {
    out.adversarial = train_adversarial(out.mapping, src, tgt, cfg.adversarial, observer);
    out.mapping = out.adversarial->mapping;
    out.mapping.stage = Stage::adversarial;
  }
  if (stages.refine) {
    out.refinement = refine(out.mapping, src, tgt, cfg.refinement);
    out.mapping = out.refinement->mapping;
  }
  return out;
}

}  // namespace sar
