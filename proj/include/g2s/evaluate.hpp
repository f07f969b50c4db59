#pragma once

// Split-level evaluation: constraint accuracy and rule-based recall on
// generated (or ground-truth) scenes, plus diversity over repeated samples.

#include <cstdint>
#include <vector>

#include "g2s/eval.hpp"
#include "g2s/model.hpp"
#include "g2s/synthdata.hpp"

namespace g2s {

struct EvaluateOptions {
  std::uint64_t seed = 0;
  std::size_t diversity_graphs = 0;   // graphs used for diversity, 0 to skip
  std::size_t diversity_samples = 10;
  RuleOptions rules;
};

struct EvaluationReport {
  ConstraintReport constraint;
  RecallReport recall;
  std::vector<DiversityReport> diversity;  // one per graph
  std::size_t num_graphs = 0;
};

/// Scene i is generated with derive_seed(opt.seed, i); without a model the
/// ground-truth scenes are scored instead.
EvaluationReport evaluate_split(const Model* m, const std::vector<Sample>& data, const Vocabulary& v,
                                const EvaluateOptions& opt = {});

Json evaluation_report_to_json(const EvaluationReport& r);

}  // namespace g2s
