// Copyright 2026 The streetlabel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "streetlabel/pipeline.hpp"
#include "streetlabel/synth.hpp"

namespace {

using namespace streetlabel;

struct Overrides {
  std::optional<std::string> config, manifest, out, provider, move, corpus;
  std::optional<unsigned> workers;
  std::optional<int> main_param, image_size, epochs;
  std::optional<std::size_t> k;
  std::optional<double> lambda, alpha, epsilon, learning_rate;
  std::optional<std::uint64_t> displacement_seed;
  bool no_mrf = false, hard_mrf = false, shift_ablation = false, quiet = false;

  PipelineConfig resolve() const {
    PipelineConfig c = config ? load_config(*config) : PipelineConfig{};
    if (manifest) c.manifest = *manifest;
    if (out) c.output = *out;
    if (workers) c.workers = *workers;
    if (main_param) c.main_param = *main_param;
    if (image_size) c.image_size = *image_size;
    if (epochs) c.hyper.epochs = *epochs;
    if (learning_rate) c.hyper.learning_rate = *learning_rate;
    if (provider) c.provider = *provider;
    if (k) c.k = *k;
    if (corpus) c.corpus = *corpus;
    if (lambda) c.lambda = *lambda;
    if (alpha) c.cooccurrence.alpha = *alpha;
    if (epsilon) c.cooccurrence.floor = *epsilon;
    if (move) c.move = parse_move(*move);
    if (displacement_seed) c.displacement_seed = *displacement_seed;
    if (no_mrf) c.mrf = false;
    if (hard_mrf) c.hard_mrf = true;
    if (shift_ablation) c.shift_ablation = true;
    return c;
  }
};

void add_pipeline_options(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config, "TOML configuration file")->check(CLI::ExistingFile);
  app.add_option("--manifest", o.manifest, "dataset manifest (JSON)");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--workers", o.workers, "worker threads (0 = all cores)");
  app.add_option("--main-param", o.main_param, "main superpixel count K");
  app.add_option("--image-size", o.image_size, "working resolution (0 keeps the input size)");
  app.add_option("--epochs", o.epochs, "baseline training epochs");
  app.add_option("--learning-rate", o.learning_rate, "baseline learning rate");
  app.add_option("--provider", o.provider, "scorer provider: baseline or score-files");
  app.add_option("--k", o.k, "retrieval set size");
  app.add_option("--corpus", o.corpus, "packed global feature corpus (GFEC) for the train split");
  app.add_option("--lambda", o.lambda, "MRF smoothness weight");
  app.add_option("--alpha", o.alpha, "co-occurrence smoothing");
  app.add_option("--epsilon", o.epsilon, "co-occurrence probability floor");
  app.add_option("--mrf-move", o.move, "MRF move: swap or expansion");
  app.add_option("--displacement-seed", o.displacement_seed, "seed for the shift ablation");
  app.add_flag("--no-mrf", o.no_mrf, "stop at the argmax labeling");
  app.add_flag("--hard-mrf", o.hard_mrf, "use unit pairwise weights");
  app.add_flag("--shift-ablation", o.shift_ablation, "randomly displace superpixels before feature extraction");
  app.add_flag("--quiet", o.quiet, "suppress progress output");
}

struct SynthOptions {
  std::string kind = "street";
  std::string out = "synth";
  SynthParams params;
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"streetlabel: superpixel street-scene labeling"};
  app.require_subcommand(1);
  Overrides o;
  SynthOptions synth;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"segment", "superpixel maps for every image"},
      {"augment", "training units and class histogram"},
      {"train", "fit the baseline scorer"},
      {"score", "label scores for the test split"},
      {"retrieve", "nearest training images for each test image"},
      {"label", "argmax labeling refined by the MRF"},
      {"eval", "metrics report for the test split"},
      {"render", "colour overlays of the predictions"},
      {"pipeline", "every stage above in order"},
  };
  for (const auto& [name, help] : commands) add_pipeline_options(*app.add_subcommand(name, help), o);

  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  synth_cmd->add_option("--kind", synth.kind, "street, twin-bands, small-objects or skewed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "dataset directory")->capture_default_str();
  synth_cmd->add_option("--train", synth.params.n_train, "training images")->capture_default_str();
  synth_cmd->add_option("--test", synth.params.n_test, "test images")->capture_default_str();
  synth_cmd->add_option("--size", synth.params.size, "image side in pixels")->capture_default_str();
  synth_cmd->add_option("--seed", synth.params.seed, "random seed")->capture_default_str();
  synth_cmd->add_option("--noise", synth.params.noise, "colour noise std")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string what = e.what();
    if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1]))
      what = std::string("unknown subcommand '") + argv[1] + "'";
    std::cerr << "error: " << what << "\n\n" << app.help();
    return 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    if (cmd == synth_cmd) {
      synth.params.kind = parse_synth_kind(synth.kind);
      const auto m = write_synth_dataset(synth.out, synth.params);
      std::cout << "synth: " << m.entries.size() << " images written to " << synth.out << "\n";
      return 0;
    }
    std::ostringstream sink;
    std::ostream& log = o.quiet ? static_cast<std::ostream&>(sink) : std::cout;
    Pipeline p(o.resolve(), log);
    if (name == "segment") p.segment_all();
    else if (name == "augment") p.augment();
    else if (name == "train") p.train();
    else if (name == "score") p.score_test();
    else if (name == "retrieve") p.retrieve();
    else if (name == "label") p.label();
    else if (name == "eval") p.eval();
    else if (name == "render") p.render();
    else p.run_all();
  } catch (const std::exception& e) {
    std::cerr << "streetlabel " << name << ": error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
