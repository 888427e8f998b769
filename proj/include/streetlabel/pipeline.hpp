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

#pragma once

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "streetlabel/augment.hpp"
#include "streetlabel/color.hpp"
#include "streetlabel/config.hpp"
#include "streetlabel/context.hpp"
#include "streetlabel/manifest.hpp"
#include "streetlabel/metrics.hpp"
#include "streetlabel/mrf.hpp"
#include "streetlabel/png_io.hpp"
#include "streetlabel/retrieval.hpp"
#include "streetlabel/scorer.hpp"
#include "streetlabel/slic.hpp"

namespace streetlabel {

namespace fs = std::filesystem;

// Runs fn(0..n-1) on up to `workers` threads. Every index runs even if some
// fail; the failure with the lowest index is rethrown.
template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), n));
  if (threads <= 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(body);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One manifest entry at working resolution.
struct WorkingImage {
  RgbImage rgb;
  LabImage lab;
  LabelMap gt;          // working resolution
  LabelMap gt_original; // as stored
};

// Output directory layout:
//   config.toml            snapshot of the effective configuration
//   spxm/                  superpixel maps, <id>_k<K>[_flip].spxm
//   units.csv              training units after augmentation
//   histogram.csv          class histogram of the units
//   model.bmdl, loss.csv   baseline scorer and its training loss
//   scores/<id>.spsc       label scores of test images
//   retrieval/<id>.json    nearest training images of each test image
//   cooccurrence/<id>.*    co-occurrence model per test image
//   trace/<id>.jsonl       accepted MRF moves
//   labels/<id>.png        predicted label maps at the input resolution
//   report.json            metrics over the test split
//   render/<id>.png        colour overlays of the predictions
class Pipeline {
public:
  Pipeline(PipelineConfig config, std::ostream& log) : config_(std::move(config)), log_(log) {
    config_.validate();
    if (config_.manifest.empty()) throw Error("no manifest given");
    manifest_ = load_manifest(config_.manifest);
    out_ = config_.output;
    fs::create_directories(out_);
    write_text(out_ / "config.toml", config_to_toml(config_));
    check_segmentation_cache();
    workers_ = config_.workers ? config_.workers : std::max(1u, std::thread::hardware_concurrency());
  }

  const PipelineConfig& config() const { return config_; }
  const DatasetManifest& manifest() const { return manifest_; }
  const fs::path& output() const { return out_; }

  static std::string stem(std::size_t id) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", id);
    return buf;
  }

  WorkingImage load(std::size_t id) const {
    const auto& e = manifest_.entries.at(id);
    WorkingImage w;
    w.rgb = load_rgb_png(manifest_.resolve(e.image));
    w.gt_original = load_label_map(manifest_.resolve(e.labels), manifest_.classes);
    if (w.gt_original.width != w.rgb.width || w.gt_original.height != w.rgb.height)
      throw Error("image and label map sizes differ");
    const int s = config_.image_size;
    if (s > 0 && (w.rgb.width != s || w.rgb.height != s)) {
      w.rgb = resize_bilinear(w.rgb, s, s);
      w.gt = resize_nearest(w.gt_original, s, s);
    } else {
      w.gt = w.gt_original;
    }
    w.lab = rgb_to_lab(w.rgb);
    return w;
  }

  // Cached segmentation of an entry; flipped maps describe the mirrored image.
  SuperpixelMap segmentation(std::size_t id, int k, bool flipped, const LabImage* lab = nullptr) const {
    const fs::path path = out_ / "spxm" / (stem(id) + "_k" + std::to_string(k) + (flipped ? "_flip" : "") + ".spxm");
    if (fs::exists(path)) return load_superpixel_map(path.string(), flipped);
    const SuperpixelMap spx = lab ? segment(*lab, config_.slic(k), flipped) : segment(load(id).lab, config_.slic(k), flipped);
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    save_superpixel_map(tmp.string(), spx);
    fs::rename(tmp, path);
    return spx;
  }

  void segment_all() {
    std::vector<std::size_t> ids(manifest_.entries.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    for_entries("segment", ids, [&](std::size_t id) {
      const auto w = load(id);
      segmentation(id, config_.main_param, false, &w.lab);
    });
    log_ << "segment: " << ids.size() << " images at K=" << config_.main_param << "\n";
  }

  std::vector<TrainingUnit> augment() {
    const auto train = manifest_.indices(Split::kTrain);
    if (train.empty()) throw Error("augment: empty train split");
    const AugmentationPlan plan = config_.effective_plan();
    plan.validate();
    config_.thresholds.validate();
    std::vector<std::vector<TrainingUnit>> parts(train.size());
    for_positions("augment", train, [&](std::size_t pos) {
      const std::size_t id = train[pos];
      const EntrySource source(*this, id, load(id));
      parts[pos] = image_training_units(source, 0, plan, config_.thresholds, manifest_.classes);
    });
    std::vector<TrainingUnit> units;
    for (auto& p : parts) units.insert(units.end(), p.begin(), p.end());
    save_units((out_ / "units.csv").string(), units);
    const auto hist = class_histogram(units);
    write_text(out_ / "histogram.csv", histogram_csv(hist, manifest_.classes));
    log_ << "augment: " << units.size() << " units from " << train.size() << " images\n";
    return units;
  }

  BaselineModel train() {
    const auto units = load_units((out_ / "units.csv").string());
    if (units.empty()) throw Error("train: no training units");
    std::map<std::size_t, std::set<std::pair<int, bool>>> needed;
    for (const auto& u : units) {
      if (u.image_id >= manifest_.entries.size() || manifest_.entries[u.image_id].split != Split::kTrain)
        throw Error("train: unit references image " + std::to_string(u.image_id) + " outside the train split");
      needed[u.image_id].insert({u.k, u.flipped});
    }
    std::vector<std::size_t> ids;
    for (const auto& [id, _] : needed) ids.push_back(id);
    using Extracted = std::vector<std::tuple<int, bool, std::vector<FeatureVector>>>;
    std::vector<Extracted> extracted(ids.size());
    for_positions("train", ids, [&](std::size_t pos) {
      const std::size_t id = ids[pos];
      const auto w = load(id);
      const LabImage mirrored = flip_horizontal(w.lab);
      for (const auto& [k, flipped] : needed[id]) {
        const auto spx = segmentation(id, k, flipped, &w.lab);
        extracted[pos].emplace_back(k, flipped, features_of(flipped ? mirrored : w.lab, spx, id, k));
      }
    });
    FeatureStore store;
    for (std::size_t pos = 0; pos < ids.size(); ++pos)
      for (auto& [k, flipped, f] : extracted[pos]) store.put(ids[pos], k, flipped, std::move(f));
    const BaselineModel model = train_baseline(units, store, manifest_.classes.size(), config_.hyper);
    save_model((out_ / "model.bmdl").string(), model);
    std::ostringstream loss;
    loss << std::setprecision(17) << "epoch,loss\n";
    for (std::size_t e = 0; e < model.loss_history.size(); ++e) loss << e << "," << model.loss_history[e] << "\n";
    write_text(out_ / "loss.csv", loss.str());
    log_ << "train: " << units.size() << " units, " << config_.hyper.epochs << " epochs";
    if (!model.loss_history.empty()) log_ << ", final loss " << model.loss_history.back();
    log_ << "\n";
    return model;
  }

  void score_test() {
    const auto test = manifest_.indices(Split::kTest);
    fs::create_directories(out_ / "scores");
    const bool baseline = config_.provider == "baseline";
    BaselineModel model;
    if (baseline) model = load_model((out_ / "model.bmdl").string());
    if (baseline && model.n_classes != manifest_.classes.size())
      throw Error("score: model has " + std::to_string(model.n_classes) + " classes, manifest has " +
                  std::to_string(manifest_.classes.size()));
    std::vector<std::size_t> renormalized(test.size(), 0);
    for_positions("score", test, [&](std::size_t pos) {
      const std::size_t id = test[pos];
      const auto w = load(id);
      const auto spx = segmentation(id, config_.main_param, false, &w.lab);
      LabelScoreMatrix scores;
      if (baseline) {
        scores = score(model, features_of(w.lab, spx, id, config_.main_param));
      } else {
        const auto& path = manifest_.entries[id].scores;
        if (!path) throw Error("no score file listed for this entry");
        ScoreReadReport report;
        scores = load_scores(manifest_.resolve(*path), &report);
        renormalized[pos] = report.renormalized_rows.size();
        if (scores.rows() != spx.size())
          throw Error("score file has " + std::to_string(scores.rows()) + " rows, segmentation has " +
                      std::to_string(spx.size()) + " superpixels");
        if (scores.cols() != manifest_.classes.size())
          throw Error("score file has " + std::to_string(scores.cols()) + " classes, manifest has " +
                      std::to_string(manifest_.classes.size()));
      }
      save_scores((out_ / "scores" / (stem(id) + ".spsc")).string(), scores);
    });
    for (std::size_t pos = 0; pos < test.size(); ++pos)
      if (renormalized[pos])
        log_ << "score: warning: entry " << test[pos] << ": renormalized " << renormalized[pos] << " rows\n";
    log_ << "score: " << test.size() << " test images (" << config_.provider << ")\n";
  }

  void retrieve() {
    const auto train = manifest_.indices(Split::kTrain);
    const auto test = manifest_.indices(Split::kTest);
    if (train.empty()) throw Error("retrieve: empty train split");
    std::vector<GlobalFeature> packed;
    if (!config_.corpus.empty()) {
      packed = load_feature_corpus(config_.corpus);
      if (packed.size() != train.size())
        throw Error("retrieve: corpus file has " + std::to_string(packed.size()) + " rows for " +
                    std::to_string(train.size()) + " training images");
    }
    std::vector<CorpusItem> corpus(train.size());
    for_positions("retrieve", train, [&](std::size_t pos) {
      corpus[pos] = {train[pos], packed.empty() ? global_feature(train[pos]) : packed[pos]};
    });
    fs::create_directories(out_ / "retrieval");
    for_positions("retrieve", test, [&](std::size_t pos) {
      const std::size_t id = test[pos];
      const RetrievalSet r = knn_retrieve(global_feature(id), corpus, config_.k);
      nlohmann::ordered_json j;
      j["query"] = id;
      j["k"] = config_.k;
      auto list = nlohmann::ordered_json::array();
      for (const auto& n : r) list.push_back({{"image_id", n.image_id}, {"distance", n.distance}});
      j["neighbours"] = list;
      write_text(out_ / "retrieval" / (stem(id) + ".json"), j.dump(2) + "\n");
    });
    log_ << "retrieve: " << test.size() << " queries against " << train.size() << " images, k=" << config_.k << "\n";
  }

  void label() {
    const auto test = manifest_.indices(Split::kTest);
    fs::create_directories(out_ / "labels");
    ContextTable context;
    if (config_.mrf) {
      context = build_context_table();
      fs::create_directories(out_ / "cooccurrence");
      fs::create_directories(out_ / "trace");
    }
    std::vector<int> moves(test.size(), 0);
    for_positions("label", test, [&](std::size_t pos) {
      const std::size_t id = test[pos];
      const auto w = load(id);
      const auto spx = segmentation(id, config_.main_param, false, &w.lab);
      LabelScoreMatrix scores = load_scores((out_ / "scores" / (stem(id) + ".spsc")).string());
      if (scores.rows() != spx.size()) throw Error("score rows do not match the segmentation");
      Labeling labels = argmax_labeling(scores);
      if (config_.mrf) {
        const RetrievalSet r = load_retrieval(id);
        const auto model = estimate_cooccurrence(r, context, manifest_.classes.size(), config_.cooccurrence);
        save_cooccurrence((out_ / "cooccurrence" / (stem(id) + ".csv")).string(),
                          (out_ / "cooccurrence" / (stem(id) + ".json")).string(), model, manifest_.classes,
                          config_.k, r);
        const MRFProblem problem{std::move(scores), build_adjacency(spx), model, config_.lambda, config_.hard_mrf};
        SolveResult result = solve(problem, labels, {config_.move});
        save_energy_trace((out_ / "trace" / (stem(id) + ".jsonl")).string(), result.trace);
        moves[pos] = static_cast<int>(result.trace.size());
        labels = std::move(result.labels);
      }
      LabelMap map(spx.width, spx.height);
      for (std::size_t p = 0; p < map.size(); ++p) map.pixels[p] = labels[spx.assignment[p]];
      if (map.width != w.gt_original.width || map.height != w.gt_original.height)
        map = resize_nearest(map, w.gt_original.width, w.gt_original.height);
      save_label_map((out_ / "labels" / (stem(id) + ".png")).string(), map);
    });
    int total_moves = 0;
    for (int m : moves) total_moves += m;
    log_ << "label: " << test.size() << " test images";
    if (config_.mrf)
      log_ << ", MRF lambda=" << config_.lambda << (config_.hard_mrf ? " (hard)" : "") << ", " << total_moves
           << " accepted moves";
    else
      log_ << ", MRF disabled";
    log_ << "\n";
  }

  ConfusionMatrix eval() {
    const auto test = manifest_.indices(Split::kTest);
    if (test.empty()) throw Error("eval: empty test split");
    std::vector<ConfusionMatrix> parts(test.size(), ConfusionMatrix(manifest_.classes.size()));
    for_positions("eval", test, [&](std::size_t pos) {
      const std::size_t id = test[pos];
      const auto truth = load_label_map(manifest_.resolve(manifest_.entries[id].labels), manifest_.classes);
      const auto pred = load_label_map((out_ / "labels" / (stem(id) + ".png")).string(), manifest_.classes);
      accumulate(parts[pos], pred, truth);
    });
    ConfusionMatrix total(manifest_.classes.size());
    for (const auto& p : parts) total += p;
    write_text(out_ / "report.json", metrics_report(total, manifest_.classes).dump(2) + "\n");
    log_ << metrics_table(total, manifest_.classes);
    return total;
  }

  void render() {
    const auto test = manifest_.indices(Split::kTest);
    fs::create_directories(out_ / "render");
    for_positions("render", test, [&](std::size_t pos) {
      const std::size_t id = test[pos];
      const auto image = load_rgb_png(manifest_.resolve(manifest_.entries[id].image));
      const auto pred = load_label_map((out_ / "labels" / (stem(id) + ".png")).string(), manifest_.classes);
      if (pred.width != image.width || pred.height != image.height) throw Error("label map size differs from image");
      RgbImage overlay = render_label_map(pred, manifest_.classes);
      for (std::size_t p = 0; p < overlay.size(); ++p)
        for (int c = 0; c < 3; ++c)
          overlay.pixels[p][c] = static_cast<std::uint8_t>((overlay.pixels[p][c] + image.pixels[p][c] + 1) / 2);
      save_rgb_png((out_ / "render" / (stem(id) + ".png")).string(), overlay);
    });
    log_ << "render: " << test.size() << " overlays\n";
  }

  ConfusionMatrix run_all() {
    segment_all();
    augment();
    if (config_.provider == "baseline") train();
    score_test();
    retrieve();
    label();
    ConfusionMatrix m = eval();
    render();
    return m;
  }

private:
  // Augmentation source over a single, already loaded entry.
  struct EntrySource {
    const Pipeline& pipeline;
    std::size_t id;
    WorkingImage image;

    EntrySource(const Pipeline& p, std::size_t i, WorkingImage w) : pipeline(p), id(i), image(std::move(w)) {}

    std::size_t size() const { return 1; }
    std::size_t image_id(std::size_t) const { return id; }
    std::vector<double> proportions(std::size_t) const {
      return label_proportions(image.gt, pipeline.manifest_.classes);
    }
    std::vector<ClassIndex> segment_labels(std::size_t, int k, bool flipped) const {
      const auto spx = pipeline.segmentation(id, k, flipped, &image.lab);
      return superpixel_majority_label(spx, flipped ? flip_horizontal(image.gt) : image.gt, pipeline.manifest_.classes);
    }
  };

  // Adjacency and majority labels of every training image at the main parameter.
  struct ContextTable {
    std::map<std::size_t, std::pair<AdjacencyGraph, std::vector<ClassIndex>>> items;
    std::pair<AdjacencyGraph, std::vector<ClassIndex>> context_of(std::size_t id) const {
      auto it = items.find(id);
      if (it == items.end()) throw Error("retrieval references image " + std::to_string(id) + " outside the train split");
      return it->second;
    }
  };

  // Cached maps are keyed by image and K only, so they are dropped whenever
  // any other setting that shapes them changes.
  void check_segmentation_cache() const {
    std::ostringstream key;
    key << "compactness = " << toml::format_double(config_.compactness) << "\niterations = " << config_.iterations
        << "\nimage_size = " << config_.image_size << "\nmanifest = " << fs::absolute(config_.manifest).string() << "\n";
    const fs::path dir = out_ / "spxm", stamp = dir / "params.txt";
    if (fs::exists(stamp) && read_text(stamp) == key.str()) return;
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_text(stamp, key.str());
  }

  ContextTable build_context_table() const {
    const auto train = manifest_.indices(Split::kTrain);
    std::vector<std::pair<AdjacencyGraph, std::vector<ClassIndex>>> items(train.size());
    for_positions("label", train, [&](std::size_t pos) {
      const auto w = load(train[pos]);
      const auto spx = segmentation(train[pos], config_.main_param, false, &w.lab);
      items[pos] = {build_adjacency(spx), superpixel_majority_label(spx, w.gt, manifest_.classes)};
    });
    ContextTable t;
    for (std::size_t pos = 0; pos < train.size(); ++pos) t.items.emplace(train[pos], std::move(items[pos]));
    return t;
  }

  std::vector<FeatureVector> features_of(const LabImage& lab, const SuperpixelMap& spx, std::size_t id, int k) const {
    if (!config_.shift_ablation) return extract_features(lab, spx);
    const std::uint64_t seed = mix_seed(config_.displacement_seed ^ mix_seed(id) ^
                                        mix_seed((static_cast<std::uint64_t>(k) << 1) | spx.flipped));
    return extract_features(lab, spx, displacement_offsets(spx, seed));
  }

  GlobalFeature global_feature(std::size_t id) const {
    const auto& e = manifest_.entries[id];
    if (e.features) return load_global_feature(manifest_.resolve(*e.features));
    return builtin_global_feature(load(id).lab);
  }

  RetrievalSet load_retrieval(std::size_t id) const {
    const auto j = nlohmann::json::parse(read_text(out_ / "retrieval" / (stem(id) + ".json")));
    RetrievalSet r;
    for (const auto& n : j.at("neighbours")) r.push_back({n.at("image_id").get<std::size_t>(), n.at("distance").get<double>()});
    if (r.empty()) throw Error("empty retrieval list");
    return r;
  }

  template <typename F>
  void for_positions(const std::string& stage, const std::vector<std::size_t>& ids, F&& fn) const {
    parallel_for(ids.size(), workers_, [&](std::size_t pos) {
      try {
        fn(pos);
      } catch (const std::exception& e) {
        const auto& entry = manifest_.entries[ids[pos]];
        throw Error(stage + ": entry " + std::to_string(ids[pos]) + " (" + entry.image + "): " + e.what());
      }
    });
  }

  template <typename F>
  void for_entries(const std::string& stage, const std::vector<std::size_t>& ids, F&& fn) const {
    for_positions(stage, ids, [&](std::size_t pos) { fn(ids[pos]); });
  }

  PipelineConfig config_;
  std::ostream& log_;
  DatasetManifest manifest_;
  fs::path out_;
  unsigned workers_ = 1;
};

} // namespace streetlabel
