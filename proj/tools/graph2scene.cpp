// Command-line entry points: dataset synthesis, point-cloud preparation,
// training, generation, manipulation, evaluation and the JSON service.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "g2s/checkpoint.hpp"
#include "g2s/documents.hpp"
#include "g2s/error.hpp"
#include "g2s/evaluate.hpp"
#include "g2s/prep.hpp"
#include "g2s/service.hpp"
#include "g2s/synthdata.hpp"
#include "g2s/training.hpp"

namespace fs = std::filesystem;
using namespace g2s;

namespace {

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file(out, text);
  }
}

Vocabulary vocabulary_option(const std::string& path) {
  if (path.empty() || path == "synthetic") return synthetic_vocabulary();
  return read_vocabulary(read_file(path));
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene generation and manipulation from scene graphs"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  std::string synth_out, synth_cfg;
  SynthConfig sc;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--config", synth_cfg, "SynthConfig JSON file (flags override it)");
  auto* o_num = synth->add_option("--num-scenes", sc.num_scenes, "Number of scenes");
  auto* o_min = synth->add_option("--min-objects", sc.min_objects, "Minimum objects per scene, floor included");
  auto* o_max = synth->add_option("--max-objects", sc.max_objects, "Maximum objects per scene, floor included");
  auto* o_seed_synth = synth->add_option("--seed", sc.seed, "Dataset seed");

  // prep
  auto* prep = app.add_subcommand("prep", "Fit canonical boxes to object point clouds");
  std::string prep_in, prep_out, prep_vocab;
  prep->add_option("--input", prep_in, "Object manifest JSON")->required()->check(CLI::ExistingFile);
  prep->add_option("--vocab", prep_vocab, "Vocabulary JSON (default: synthetic)");
  prep->add_option("--out", prep_out, "Scene document output (default stdout)");
  prep->add_option("--seed", seed, "RANSAC seed");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  std::string train_data, train_ckpt, train_log, train_resume;
  TrainConfig tc;
  std::size_t train_limit = 0;
  bool verbose = false;
  train_cmd->add_option("--data", train_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train_ckpt, "Checkpoint output")->required();
  train_cmd->add_option("--log", train_log, "Metric log (JSON lines)");
  train_cmd->add_option("--resume", train_resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", tc.epochs, "Epochs");
  train_cmd->add_option("--batch-size", tc.batch_size, "Scenes per batch");
  train_cmd->add_option("--lr", tc.lr, "Adam learning rate");
  train_cmd->add_option("--limit", train_limit, "Use only the first N training scenes");
  train_cmd->add_option("--seed", tc.seed, "Initialization and sampling seed");
  train_cmd->add_flag("--verbose", verbose, "Print per-epoch progress with timings to stderr");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a scene from a graph");
  std::string gen_ckpt, gen_graph, gen_out;
  GenerateOptions gopt;
  gen->add_option("--checkpoint", gen_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  gen->add_option("--graph", gen_graph, "Graph document")->required()->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "Latent seed");
  gen->add_option("--points", gopt.n_points, "Decoded points per object");
  gen->add_flag("--zero-latent", gopt.zero_latent, "Decode z = 0 instead of a prior sample");
  gen->add_option("--out", gen_out, "Scene document output (default stdout)");

  // manipulate
  auto* man = app.add_subcommand("manipulate", "Apply a graph change to a scene");
  std::string man_ckpt, man_graph, man_scene, man_change, man_out;
  GenerateOptions mopt;
  man->add_option("--checkpoint", man_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  man->add_option("--graph", man_graph, "Graph document")->required()->check(CLI::ExistingFile);
  man->add_option("--scene", man_scene, "Scene document")->required()->check(CLI::ExistingFile);
  man->add_option("--change", man_change, "Change document")->required()->check(CLI::ExistingFile);
  man->add_option("--seed", seed, "Noise seed");
  man->add_option("--points", mopt.n_points, "Decoded points per object");
  man->add_option("--out", man_out, "Scene document output (default stdout)");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score generated or ground-truth scenes of a split");
  std::string ev_ckpt, ev_data, ev_split = "val", ev_out;
  EvaluateOptions eopt;
  ev->add_option("--data", ev_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--split", ev_split, "Split name")->check(CLI::IsMember({"train", "val"}));
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint; omit to score ground truth")->check(CLI::ExistingFile);
  ev->add_option("--diversity-graphs", eopt.diversity_graphs, "Graphs sampled repeatedly for diversity");
  ev->add_option("--diversity-samples", eopt.diversity_samples, "Samples per diversity graph");
  ev->add_flag("--literal-height", eopt.rules.literal_height, "Compare h + cz/2 in higher/lower");
  ev->add_option("--seed", eopt.seed, "Generation seed");
  ev->add_option("--out", ev_out, "Report output (default stdout)");

  // serve
  auto* srv = app.add_subcommand("serve", "Run the JSON service");
  std::string srv_ckpt, srv_host = "127.0.0.1";
  int srv_port = 8080;
  std::size_t srv_points = 1024;
  srv->add_option("--checkpoint", srv_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  srv->add_option("--port", srv_port, "Port")->check(CLI::Range(0, 65535));
  srv->add_option("--host", srv_host, "Bind address");
  srv->add_option("--points", srv_points, "Decoded points per object");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      SynthConfig cfg = synth_cfg.empty() ? SynthConfig{} : SynthConfig::from_json(parse_json(read_file(synth_cfg)));
      if (*o_num) cfg.num_scenes = sc.num_scenes;
      if (*o_min) cfg.min_objects = sc.min_objects;
      if (*o_max) cfg.max_objects = sc.max_objects;
      if (*o_seed_synth) cfg.seed = sc.seed;
      make_dataset(cfg, synth_out);
    } else if (*prep) {
      const Vocabulary v = vocabulary_option(prep_vocab);
      PrepOptions po;
      po.ransac.seed = seed;
      const auto objs = prep_objects_from_json(parse_json(read_file(prep_in)), v, fs::path(prep_in).parent_path());
      emit(prep_out, write_scene(prepare_scene(objs, v, po), v));
    } else if (*train_cmd) {
      const Vocabulary v = load_dataset_vocabulary(train_data);
      std::vector<Sample> data = load_split(train_data, "train", v);
      if (train_limit > 0 && train_limit < data.size()) data.resize(train_limit);
      Model m = train_resume.empty() ? Model(v, ModelConfig{v.num_objects(), v.num_predicates()}, tc.seed)
                                     : load_checkpoint(train_resume, v);
      std::ofstream log;
      if (!train_log.empty()) {
        log.open(train_log, std::ios::app);
        if (!log) throw Error("cannot open metric log " + train_log);
      }
      train(m, data, tc, train_log.empty() ? nullptr : &log, [&](const EpochReport& r) {
        if (verbose) std::cerr << "epoch " << r.epoch << " total " << r.mean.total << " (" << r.seconds << " s)\n";
      });
      save_checkpoint(m, train_ckpt);
    } else if (*gen) {
      const Model m = load_checkpoint(gen_ckpt);
      const SceneGraph g = read_graph(read_file(gen_graph), m.vocab);
      emit(gen_out, write_scene(generate(m, g, seed, gopt), m.vocab));
    } else if (*man) {
      const Model m = load_checkpoint(man_ckpt);
      const SceneGraph g = read_graph(read_file(man_graph), m.vocab);
      const Scene s = read_scene(read_file(man_scene), m.vocab);
      const GraphChange c = read_change(read_file(man_change), g, m.vocab);
      emit(man_out, write_scene(manipulate_scene(m, g, s, c, seed, mopt), m.vocab));
    } else if (*ev) {
      const Vocabulary v = load_dataset_vocabulary(ev_data);
      const auto data = load_split(ev_data, ev_split, v);
      std::optional<Model> m;
      if (!ev_ckpt.empty()) m = load_checkpoint(ev_ckpt, v);
      emit(ev_out, evaluation_report_to_json(evaluate_split(m ? &*m : nullptr, data, v, eopt)).dump(2) + "\n");
    } else if (*srv) {
      auto model = std::make_shared<const Model>(load_checkpoint(srv_ckpt));
      const Service service(model, srv_points);
      HttpServer server(service);
      const int port = server.bind(srv_host, srv_port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << srv_host << ":" << port << "\n";
      server.listen();
      g_server = nullptr;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
