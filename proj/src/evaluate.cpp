#include "g2s/evaluate.hpp"

namespace g2s {

EvaluationReport evaluate_split(const Model* m, const std::vector<Sample>& data, const Vocabulary& v,
                                const EvaluateOptions& opt) {
  EvaluationReport rep;
  ConstraintTally ct;
  RecallTally rt;
  const GraphPredictor predictor = rule_predictor(v, synthetic_size_priors(), opt.rules);
  GenerateOptions go;
  go.n_points = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data[i];
    const Scene scene = m ? generate(*m, s.graph, derive_seed(opt.seed, i), go) : s.scene;
    ct.add(scene, s.graph, v, opt.rules);
    rt.add(s.graph, v, predictor(scene, s.graph));
  }
  rep.constraint = ct.report();
  rep.recall = rt.report();
  rep.num_graphs = data.size();
  if (m && opt.diversity_graphs > 0) {
    const SuperquadricCodec codec(v.num_objects());
    for (std::size_t i = 0; i < std::min(opt.diversity_graphs, data.size()); ++i) {
      std::vector<Scene> samples;
      for (std::size_t k = 0; k < opt.diversity_samples; ++k)
        samples.push_back(generate(*m, data[i].graph, derive_seed(derive_seed(opt.seed, 0x646976ULL + i), k), go));
      rep.diversity.push_back(diversity(samples, codec));
    }
  }
  return rep;
}

Json evaluation_report_to_json(const EvaluationReport& r) {
  Json d = Json::array();
  for (const auto& x : r.diversity) d.push_back(diversity_report_to_json(x));
  return Json{{"num_graphs", r.num_graphs},
              {"constraint", constraint_report_to_json(r.constraint)},
              {"recall", recall_report_to_json(r.recall)},
              {"diversity", d}};
}

}  // namespace g2s
