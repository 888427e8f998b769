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

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "streetlabel/augment.hpp"
#include "streetlabel/binary_io.hpp"
#include "streetlabel/slic.hpp"

namespace streetlabel {

// ---------------------------------------------------------------------------
// Masked superpixel images and displacement
// ---------------------------------------------------------------------------

struct Offset {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

enum class DisplacementMode { kNone, kRandom };

struct Displacement {
  DisplacementMode mode = DisplacementMode::kNone;
  std::uint64_t seed = 0;
};

// Draws (dx, dy) uniformly from [-(W-1), W-1] x [-(H-1), H-1] and redraws
// until the translated bounding box lies inside the frame, which makes the
// accepted offset uniform over all valid offsets.
inline Offset random_offset(const Segment& seg, int width, int height, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> draw_x(-(width - 1), width - 1);
  std::uniform_int_distribution<int> draw_y(-(height - 1), height - 1);
  for (;;) {
    const Offset o{draw_x(rng), draw_y(rng)};
    if (seg.bbox.x0 + o.dx >= 0 && seg.bbox.x1 + o.dx < width && seg.bbox.y0 + o.dy >= 0 &&
        seg.bbox.y1 + o.dy < height)
      return o;
  }
}

// One offset per segment, drawn in segment-id order from a single stream.
inline std::vector<Offset> displacement_offsets(const SuperpixelMap& spx, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Offset> out;
  out.reserve(spx.size());
  for (const auto& seg : spx.segments) out.push_back(random_offset(seg, spx.width, spx.height, rng));
  return out;
}

// The segment's pixels at their (optionally displaced) location on a black canvas.
inline RgbImage build_masked_image(const RgbImage& source, const SuperpixelMap& spx, std::uint32_t segment_id,
                                   Displacement displacement = {}) {
  if (source.width != spx.width || source.height != spx.height)
    throw Error("build_masked_image: dimension mismatch");
  if (segment_id >= spx.size()) throw Error("build_masked_image: invalid segment id " + std::to_string(segment_id));
  Offset off{};
  if (displacement.mode == DisplacementMode::kRandom) {
    std::mt19937_64 rng(displacement.seed);
    off = random_offset(spx.segments[segment_id], spx.width, spx.height, rng);
  }
  RgbImage out(source.width, source.height, Rgb{0, 0, 0});
  const auto& box = spx.segments[segment_id].bbox;
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x)
      if (spx.at(x, y) == segment_id) out.at(x + off.dx, y + off.dy) = source.at(x, y);
  return out;
}

// ---------------------------------------------------------------------------
// Hand-crafted superpixel features for the baseline scorer
// ---------------------------------------------------------------------------

inline constexpr std::size_t kFeatureDim = 10;
using FeatureVector = std::array<double, kFeatureDim>;

// Per segment: mean L/100, mean a/128, mean b/128, the three standard
// deviations on the same scales, centroid x/width, centroid y/height,
// sqrt(area / image area) and bbox width / (width + height).
inline std::vector<FeatureVector> extract_features(const LabImage& image, const SuperpixelMap& spx,
                                                   std::span<const Offset> offsets = {}) {
  if (image.width != spx.width || image.height != spx.height) throw Error("extract_features: dimension mismatch");
  if (!offsets.empty() && offsets.size() != spx.size()) throw Error("extract_features: offset count mismatch");
  const std::size_t n = spx.size();
  std::vector<std::array<double, 3>> sum(n, {0, 0, 0}), sum_sq(n, {0, 0, 0});
  for (std::size_t p = 0; p < image.size(); ++p) {
    const auto s = spx.assignment[p];
    const Lab& px = image.pixels[p];
    const double v[3] = {px.L, px.a, px.b};
    for (int c = 0; c < 3; ++c) {
      sum[s][c] += v[c];
      sum_sq[s][c] += v[c] * v[c];
    }
  }
  const double scale[3] = {100.0, 128.0, 128.0};
  const double image_area = static_cast<double>(image.width) * image.height;
  std::vector<FeatureVector> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    const Segment& seg = spx.segments[s];
    const double count = seg.pixel_count;
    FeatureVector& f = out[s];
    for (int c = 0; c < 3; ++c) {
      const double mean = sum[s][c] / count;
      const double var = std::max(0.0, sum_sq[s][c] / count - mean * mean);
      f[c] = mean / scale[c];
      f[3 + c] = std::sqrt(var) / scale[c];
    }
    const Offset off = offsets.empty() ? Offset{} : offsets[s];
    f[6] = (seg.centroid_x + off.dx) / image.width;
    f[7] = (seg.centroid_y + off.dy) / image.height;
    f[8] = std::sqrt(count / image_area);
    f[9] = static_cast<double>(seg.bbox.width()) / (seg.bbox.width() + seg.bbox.height());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Label score matrix
// ---------------------------------------------------------------------------

class LabelScoreMatrix {
public:
  LabelScoreMatrix() = default;
  LabelScoreMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

  static LabelScoreMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    LabelScoreMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols_) throw Error("ragged score rows");
      std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
  }

  friend bool operator==(const LabelScoreMatrix&, const LabelScoreMatrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::vector<double> softmax(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) total += out[i] = std::exp(logits[i] - mx);
  for (double& v : out) v /= total;
  return out;
}

// Index of the row maximum; ties go to the lowest index.
inline std::vector<ClassIndex> argmax_labeling(const LabelScoreMatrix& scores) {
  std::vector<ClassIndex> out(scores.rows(), 0);
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto row = scores.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[r] = static_cast<ClassIndex>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Baseline scorer: multinomial logistic regression on FeatureVector
// ---------------------------------------------------------------------------

struct BaselineHyperparams {
  double learning_rate = 0.1;
  int epochs = 500;
  std::uint64_t seed = 42;
};

struct BaselineModel {
  static constexpr std::size_t kColumns = kFeatureDim + 1; // last column is the bias

  std::size_t n_classes = 0;
  std::vector<double> weights; // n_classes x kColumns, row-major
  BaselineHyperparams hyper;
  std::vector<double> loss_history;

  double weight(std::size_t c, std::size_t j) const { return weights[c * kColumns + j]; }

  std::vector<double> logits(const FeatureVector& f) const {
    std::vector<double> out(n_classes, 0.0);
    for (std::size_t c = 0; c < n_classes; ++c) {
      double z = weight(c, kFeatureDim);
      for (std::size_t j = 0; j < kFeatureDim; ++j) z += weight(c, j) * f[j];
      out[c] = z;
    }
    return out;
  }
};

// Features for every (image, K, flipped) segmentation a unit may reference.
class FeatureStore {
public:
  using Key = std::tuple<std::size_t, int, bool>;

  void put(std::size_t image_id, int k, bool flipped, std::vector<FeatureVector> features) {
    store_[{image_id, k, flipped}] = std::move(features);
  }

  const FeatureVector& at(const TrainingUnit& u) const {
    auto it = store_.find({u.image_id, u.k, u.flipped});
    if (it == store_.end())
      throw Error("unit references missing segmentation (image " + std::to_string(u.image_id) + ", K=" +
                  std::to_string(u.k) + (u.flipped ? ", flipped)" : ")"));
    if (u.segment_id >= it->second.size())
      throw Error("unit references missing segment " + std::to_string(u.segment_id) + " of image " +
                  std::to_string(u.image_id));
    return it->second[u.segment_id];
  }

  bool contains(std::size_t image_id, int k, bool flipped) const { return store_.contains({image_id, k, flipped}); }

private:
  std::map<Key, std::vector<FeatureVector>> store_;
};

// Full-batch gradient descent on the mean softmax cross-entropy, from zero
// weights. loss_history[e] is the loss before the update of epoch e.
// Descent runs on features standardized over the training units; the
// scaling is folded back into the weights, so the model applies to raw
// feature vectors.
inline BaselineModel train_baseline(const std::vector<TrainingUnit>& units, const FeatureStore& features,
                                    std::size_t n_classes, BaselineHyperparams hyper = {}) {
  if (units.empty()) throw Error("train_baseline: no training units");
  if (n_classes < 2) throw Error("train_baseline: need at least two classes");
  if (hyper.epochs < 0 || !(hyper.learning_rate > 0.0)) throw Error("train_baseline: bad hyperparameters");
  constexpr std::size_t cols = BaselineModel::kColumns;
  const std::size_t n = units.size();

  std::vector<double> x(n * cols);
  std::vector<ClassIndex> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (units[i].label >= n_classes) throw Error("train_baseline: unit label out of range");
    const FeatureVector& f = features.at(units[i]);
    std::copy(f.begin(), f.end(), x.begin() + static_cast<std::ptrdiff_t>(i * cols));
    x[i * cols + kFeatureDim] = 1.0;
    y[i] = units[i].label;
  }

  std::array<double, kFeatureDim> mean{}, stdev{};
  for (std::size_t j = 0; j < kFeatureDim; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += x[i * cols + j];
    mean[j] = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += (x[i * cols + j] - mean[j]) * (x[i * cols + j] - mean[j]);
    stdev[j] = std::sqrt(sq / static_cast<double>(n));
    if (!(stdev[j] > 1e-12)) stdev[j] = 1.0;
    for (std::size_t i = 0; i < n; ++i) x[i * cols + j] = (x[i * cols + j] - mean[j]) / stdev[j];
  }

  BaselineModel model;
  model.n_classes = n_classes;
  model.weights.assign(n_classes * cols, 0.0);
  model.hyper = hyper;

  std::vector<double> grad(n_classes * cols);
  std::vector<double> z(n_classes);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = &x[i * cols];
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n_classes; ++c) {
        double v = 0.0;
        const double* wc = &model.weights[c * cols];
        for (std::size_t j = 0; j < cols; ++j) v += wc[j] * xi[j];
        z[c] = v;
        mx = std::max(mx, v);
      }
      double total = 0.0;
      for (std::size_t c = 0; c < n_classes; ++c) total += z[c] = std::exp(z[c] - mx);
      loss -= std::log(z[y[i]] / total);
      for (std::size_t c = 0; c < n_classes; ++c) {
        const double d = z[c] / total - (c == y[i] ? 1.0 : 0.0);
        double* gc = &grad[c * cols];
        for (std::size_t j = 0; j < cols; ++j) gc[j] += d * xi[j];
      }
    }
    model.loss_history.push_back(loss / static_cast<double>(n));
    const double step = hyper.learning_rate / static_cast<double>(n);
    for (std::size_t k = 0; k < grad.size(); ++k) model.weights[k] -= step * grad[k];
  }

  for (std::size_t c = 0; c < n_classes; ++c) {
    double* wc = &model.weights[c * cols];
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      wc[j] /= stdev[j];
      wc[kFeatureDim] -= wc[j] * mean[j];
    }
  }
  return model;
}

inline LabelScoreMatrix score(const BaselineModel& model, const std::vector<FeatureVector>& features) {
  if (model.weights.size() != model.n_classes * BaselineModel::kColumns)
    throw Error("score: model weight matrix has wrong shape");
  LabelScoreMatrix out(features.size(), model.n_classes);
  for (std::size_t r = 0; r < features.size(); ++r) {
    const auto p = softmax(model.logits(features[r]));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// SPSC score files and BMDL model files
// ---------------------------------------------------------------------------

inline void save_scores(const std::string& path, const LabelScoreMatrix& scores) {
  binio::Writer w;
  w.magic("SPSC");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(scores.rows()));
  w.u32(static_cast<std::uint32_t>(scores.cols()));
  for (double v : scores.data()) w.f32(static_cast<float>(v));
  w.save(path);
}

struct ScoreReadReport {
  std::vector<std::size_t> renormalized_rows;
};

// Rows are returned exactly as stored unless their sum is off by more than
// float rounding (1e-6); then rows within 1e-4 of 1 are renormalised and
// anything worse is rejected.
inline LabelScoreMatrix load_scores(const std::string& path, ScoreReadReport* report = nullptr) {
  auto r = binio::Reader::from_file(path);
  r.expect_magic("SPSC");
  const std::uint32_t version = r.u32();
  if (version != 1) throw Error(path + ": unsupported score file version " + std::to_string(version));
  const std::uint32_t rows = r.u32(), cols = r.u32();
  if (static_cast<std::uint64_t>(rows) * cols * 4 != r.remaining()) throw Error(path + ": payload size mismatch");
  LabelScoreMatrix m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    double total = 0.0;
    for (std::uint32_t c = 0; c < cols; ++c) {
      const float v = r.f32();
      if (std::isnan(v) || std::isinf(v)) throw Error(path + ": non-finite score in row " + std::to_string(i));
      if (v < 0.0f) throw Error(path + ": negative score in row " + std::to_string(i));
      m.at(i, c) = v;
      total += v;
    }
    const double dev = std::abs(total - 1.0);
    if (dev > 1e-4)
      throw Error(path + ": row " + std::to_string(i) + " sums to " + std::to_string(total));
    if (dev > 1e-6) {
      for (double& v : m.row(i)) v /= total;
      if (report) report->renormalized_rows.push_back(i);
    }
  }
  return m;
}

inline void save_model(const std::string& path, const BaselineModel& model) {
  binio::Writer w;
  w.magic("BMDL");
  w.u32(static_cast<std::uint32_t>(model.n_classes));
  w.u32(static_cast<std::uint32_t>(BaselineModel::kColumns));
  for (double v : model.weights) w.f32(static_cast<float>(v));
  w.save(path);
}

inline BaselineModel load_model(const std::string& path) {
  auto r = binio::Reader::from_file(path);
  r.expect_magic("BMDL");
  BaselineModel model;
  model.n_classes = r.u32();
  const std::uint32_t columns = r.u32();
  if (columns != BaselineModel::kColumns)
    throw Error(path + ": model has " + std::to_string(columns) + " columns, expected " +
                std::to_string(BaselineModel::kColumns));
  if (static_cast<std::uint64_t>(model.n_classes) * columns * 4 != r.remaining())
    throw Error(path + ": payload size mismatch");
  model.weights.resize(model.n_classes * columns);
  for (double& v : model.weights) {
    v = r.f32();
    if (!std::isfinite(v)) throw Error(path + ": non-finite weight");
  }
  return model;
}

} // namespace streetlabel
