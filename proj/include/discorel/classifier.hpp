#pragma once

// Bag-of-hashed-n-grams linear classifier over (S1, S2) used to compare hard
// (majority label) and soft (softmax over vote counts) cross-entropy targets.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "discorel/agreement.hpp"
#include "discorel/corpus.hpp"
#include "discorel/error.hpp"
#include "discorel/text.hpp"

namespace discorel::classifier {

enum class LossKind { hard, soft };
enum class TargetProvenance { hard_majority, soft_softmax, union_softmax };

inline std::string_view to_string(LossKind l) { return l == LossKind::hard ? "hard" : "soft"; }

inline LossKind parse_loss(std::string_view raw) {
  auto s = text::lower(text::trim(raw));
  if (s == "hard") return LossKind::hard;
  if (s == "soft") return LossKind::soft;
  throw Error(ErrorCode::invalid_argument, "loss must be hard or soft");
}

struct Majority {
  LabelId label;
  bool tie = false;  // broken by vocabulary order
};

inline Majority majority_label(const VoteSet& vs) {
  if (vs.total() < 1) throw Error(ErrorCode::invalid_argument, "majority of an empty vote set");
  Majority m;
  int best = -1;
  for (auto [label, n] : vs.counts()) {  // map order == vocabulary order
    if (n > best) {
      best = n;
      m.label = label;
      m.tie = false;
    } else if (n == best) {
      m.tie = true;
    }
  }
  return m;
}

struct TargetVector {
  std::vector<double> probs;
  TargetProvenance provenance = TargetProvenance::soft_softmax;
  Majority majority;
};

// hard: one-hot at the majority label. soft: softmax over the raw counts of
// every vocabulary label, zeros included.
inline TargetVector make_targets(const VoteSet& vs, LossKind mode, std::size_t size, bool from_union = false) {
  TargetVector t;
  t.majority = majority_label(vs);
  t.probs.assign(size, 0.0);
  if (mode == LossKind::hard) {
    t.provenance = TargetProvenance::hard_majority;
    t.probs.at(t.majority.label.value) = 1.0;
    return t;
  }
  t.provenance = from_union ? TargetProvenance::union_softmax : TargetProvenance::soft_softmax;
  std::vector<double> counts(size, 0.0);
  for (auto [label, n] : vs.counts()) counts.at(label.value) = n;
  const double top = *std::max_element(counts.begin(), counts.end());
  double z = 0.0;
  for (std::size_t i = 0; i < size; ++i) z += (t.probs[i] = std::exp(counts[i] - top));
  for (auto& p : t.probs) p /= z;
  return t;
}

// Per-sense count sums of two annotations of the same item.
inline VoteSet mix_union(const VoteSet& a, const VoteSet& b) {
  if (a.total() > 0 && b.total() > 0 && a.item_id() != b.item_id())
    throw Error(ErrorCode::item_mismatch, a.item_id() + " vs " + b.item_id());
  VoteSet out(a.total() > 0 ? a.item_id() : b.item_id(), a.total() > 0 ? a.method() : b.method());
  for (auto [l, n] : a.counts()) out.add(l, n);
  for (auto [l, n] : b.counts()) out.add(l, n);
  return out;
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

struct FeatureConfig {
  std::uint32_t buckets = 1u << 16;
  int max_ngram = 2;
  std::uint64_t hash_seed = 0;
};

using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Hashed n-grams of S1 and S2 (tagged by side), L2-normalized.
inline SparseVector featurize(std::string_view s1, std::string_view s2, const FeatureConfig& cfg) {
  if (cfg.buckets == 0) throw Error(ErrorCode::invalid_argument, "feature buckets must be positive");
  std::vector<std::uint32_t> idx;
  auto add_side = [&](std::string_view s, std::string_view tag) {
    auto toks = tokenize(s);
    for (int n = 1; n <= cfg.max_ngram; ++n) {
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
        std::string gram(tag);
        for (int k = 0; k < n; ++k) gram += (k ? " " : "") + toks[i + static_cast<std::size_t>(k)];
        idx.push_back(static_cast<std::uint32_t>(text::fnv1a64(gram, text::fnv1a64(std::to_string(cfg.hash_seed))) %
                                                 cfg.buckets));
      }
    }
  };
  add_side(s1, "1|");
  add_side(s2, "2|");
  std::sort(idx.begin(), idx.end());
  SparseVector x;
  for (auto i : idx) {
    if (!x.empty() && x.back().first == i) x.back().second += 1.0;
    else x.emplace_back(i, 1.0);
  }
  double norm = 0.0;
  for (auto& [i, v] : x) norm += v * v;
  if (norm > 0)
    for (auto& [i, v] : x) v /= std::sqrt(norm);
  return x;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

inline void softmax_inplace(std::span<double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) sum += (v = std::exp(v - top));
  for (auto& v : z) v /= sum;
}

class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(FeatureConfig features, std::size_t classes)
      : features_(features), classes_(classes),
        weights_(static_cast<std::size_t>(features.buckets) * classes, 0.0), bias_(classes, 0.0) {}

  const FeatureConfig& features() const { return features_; }
  std::size_t classes() const { return classes_; }
  std::size_t parameter_count() const { return weights_.size() + bias_.size(); }

  // Flat parameter view: weights (bucket-major) then bias.
  double& parameter(std::size_t i) { return i < weights_.size() ? weights_[i] : bias_[i - weights_.size()]; }
  double parameter(std::size_t i) const { return i < weights_.size() ? weights_[i] : bias_[i - weights_.size()]; }

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }

  std::vector<double> logits(const SparseVector& x) const {
    std::vector<double> z(bias_);
    for (auto [f, v] : x) {
      const double* row = &weights_[static_cast<std::size_t>(f) * classes_];
      for (std::size_t k = 0; k < classes_; ++k) z[k] += v * row[k];
    }
    return z;
  }

  std::vector<double> predict(const SparseVector& x) const {
    auto z = logits(x);
    softmax_inplace(z);
    return z;
  }

  void randomize(std::uint64_t seed, double stddev) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, stddev);
    for (auto& w : weights_) w = d(rng);
    for (auto& b : bias_) b = d(rng);
  }

  bool finite() const {
    auto ok = [](double v) { return std::isfinite(v); };
    return std::all_of(weights_.begin(), weights_.end(), ok) && std::all_of(bias_.begin(), bias_.end(), ok);
  }

  // Text header, a "---" line, then bias and weights as little-endian doubles.
  std::string serialize(const SenseVocabulary& vocab = SenseVocabulary::pdtb3(), std::string_view note = "") const {
    static_assert(std::endian::native == std::endian::little, "model format is little-endian");
    std::ostringstream h;
    h << "discorel-linear-model 1\n";
    h << "classes " << classes_ << "\n";
    h << "buckets " << features_.buckets << "\n";
    h << "max_ngram " << features_.max_ngram << "\n";
    h << "hash_seed " << features_.hash_seed << "\n";
    h << "vocab_version " << vocab.version() << "\n";
    if (!note.empty()) h << "note " << note << "\n";
    h << "---\n";
    std::string out = h.str();
    auto append = [&](const std::vector<double>& v) {
      out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    };
    append(bias_);
    append(weights_);
    return out;
  }

  static LinearModel deserialize(std::string_view data) {
    auto sep = data.find("\n---\n");
    if (sep == std::string_view::npos || !text::starts_with(data, "discorel-linear-model 1\n"))
      throw Error(ErrorCode::parse_error, "not a discorel model file");
    FeatureConfig fc;
    std::size_t classes = 0;
    for (const auto& line : text::split_lines(data.substr(0, sep))) {
      auto parts = text::words(line);
      if (parts.size() < 2) continue;
      if (parts[0] == "classes") classes = std::stoul(parts[1]);
      else if (parts[0] == "buckets") fc.buckets = static_cast<std::uint32_t>(std::stoul(parts[1]));
      else if (parts[0] == "max_ngram") fc.max_ngram = std::stoi(parts[1]);
      else if (parts[0] == "hash_seed") fc.hash_seed = std::stoull(parts[1]);
    }
    if (classes == 0) throw Error(ErrorCode::parse_error, "model header lacks classes");
    LinearModel m(fc, classes);
    auto body = data.substr(sep + 5);
    const std::size_t need = (m.bias_.size() + m.weights_.size()) * sizeof(double);
    if (body.size() != need)
      throw Error(ErrorCode::parse_error, "model body has " + std::to_string(body.size()) + " bytes, expected " +
                                              std::to_string(need));
    std::memcpy(m.bias_.data(), body.data(), m.bias_.size() * sizeof(double));
    std::memcpy(m.weights_.data(), body.data() + m.bias_.size() * sizeof(double), m.weights_.size() * sizeof(double));
    return m;
  }

 private:
  FeatureConfig features_;
  std::size_t classes_ = 0;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct Example {
  std::string item_id;
  SparseVector x;
  std::vector<double> target;
  LabelId majority;
  LabelSet sublabels;  // minority-filtered labels, for set accuracy
};

// Mean cross-entropy H(target, softmax(model(x))) over the batch. When `grad`
// is given it receives d(loss)/d(parameter) in the model's flat layout.
inline double loss_and_gradient(const LinearModel& model, std::span<const Example> batch, std::vector<double>* grad) {
  const std::size_t k = model.classes();
  if (grad) grad->assign(model.parameter_count(), 0.0);
  if (batch.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  const std::size_t bias_offset = model.weights().size();
  double loss = 0.0;
  for (const auto& ex : batch) {
    auto z = model.logits(ex.x);
    const double top = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - top);
    lse = top + std::log(lse);
    for (std::size_t c = 0; c < k; ++c)
      if (ex.target[c] > 0) loss -= ex.target[c] * (z[c] - lse);
    if (grad) {
      double tsum = std::accumulate(ex.target.begin(), ex.target.end(), 0.0);
      for (std::size_t c = 0; c < k; ++c) {
        const double delta = (tsum * std::exp(z[c] - lse) - ex.target[c]) * inv;
        (*grad)[bias_offset + c] += delta;
        for (auto [f, v] : ex.x) (*grad)[static_cast<std::size_t>(f) * k + c] += delta * v;
      }
    }
  }
  return loss * inv;
}

struct TrainConfig {
  LossKind loss = LossKind::soft;
  std::size_t epochs = 30;
  std::size_t patience = 3;
  std::size_t batch_size = 8;
  double learning_rate = 0.5;
  std::uint64_t rng_seed = 13;
  std::size_t dev_size = 30;  // capped at a fifth of the data
  double init_stddev = 0.0;
};

struct TrainReport {
  std::vector<double> train_loss;  // after each epoch, on the training split
  std::vector<double> dev_loss;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  std::size_t n_train = 0;
  std::size_t n_dev = 0;
};

namespace detail {

// One mini-batch gradient step, touching only active features.
inline void sgd_step(LinearModel& model, std::span<const Example> batch, double lr) {
  const std::size_t k = model.classes();
  const double scale = lr / static_cast<double>(batch.size());
  std::vector<std::vector<double>> deltas;
  deltas.reserve(batch.size());
  for (const auto& ex : batch) {
    auto p = model.predict(ex.x);
    double tsum = std::accumulate(ex.target.begin(), ex.target.end(), 0.0);
    for (std::size_t c = 0; c < k; ++c) p[c] = tsum * p[c] - ex.target[c];
    deltas.push_back(std::move(p));
  }
  auto& w = model.weights();
  auto& b = model.bias();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t c = 0; c < k; ++c) b[c] -= scale * deltas[i][c];
    for (auto [f, v] : batch[i].x) {
      double* row = &w[static_cast<std::size_t>(f) * k];
      for (std::size_t c = 0; c < k; ++c) row[c] -= scale * v * deltas[i][c];
    }
  }
}

}  // namespace detail

inline LinearModel train(std::span<const Example> dataset, const TrainConfig& cfg, const FeatureConfig& features,
                         std::size_t classes, TrainReport* report = nullptr) {
  if (dataset.empty()) throw Error(ErrorCode::invalid_argument, "empty training set");
  if (cfg.epochs < 1) throw Error(ErrorCode::invalid_argument, "epochs must be >= 1");
  if (cfg.batch_size < 1) throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_dev = std::min(cfg.dev_size, dataset.size() / 5);
  std::vector<Example> dev, tr;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_dev ? dev : tr).push_back(dataset[order[i]]);

  LinearModel model(features, classes);
  if (cfg.init_stddev > 0) model.randomize(cfg.rng_seed ^ 0xa5a5a5a5ULL, cfg.init_stddev);
  LinearModel best = model;
  double best_dev = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  TrainReport rep;
  rep.n_train = tr.size();
  rep.n_dev = dev.size();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.batch_size < tr.size()) std::shuffle(tr.begin(), tr.end(), rng);
    for (std::size_t start = 0; start < tr.size(); start += cfg.batch_size) {
      auto len = std::min(cfg.batch_size, tr.size() - start);
      detail::sgd_step(model, std::span<const Example>(tr).subspan(start, len), cfg.learning_rate);
    }
    const double tl = loss_and_gradient(model, tr, nullptr);
    if (!std::isfinite(tl) || !model.finite())
      throw Error(ErrorCode::divergence_detected, "non-finite loss at epoch " + std::to_string(epoch + 1));
    rep.train_loss.push_back(tl);
    if (dev.empty()) {
      best = model;
      rep.best_epoch = epoch + 1;
      continue;
    }
    const double dl = loss_and_gradient(model, dev, nullptr);
    rep.dev_loss.push_back(dl);
    if (dl < best_dev - 1e-12) {
      best_dev = dl;
      best = model;
      rep.best_epoch = epoch + 1;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      rep.stopped_early = true;
      break;
    }
  }
  if (report) *report = std::move(rep);
  return best;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalResult {
  double hard_acc = 0.0;  // argmax == majority label
  double soft_acc = 0.0;  // argmax is one of the item's sub-labels
  double mean_jsd = 0.0;  // predicted vs target distribution, base 2
  std::size_t n = 0;
};

inline std::size_t argmax(std::span<const double> p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

template <typename Predictor>
EvalResult evaluate_with(Predictor&& predict, std::span<const Example> testset) {
  EvalResult r;
  r.n = testset.size();
  if (testset.empty()) return r;
  double hard = 0, soft = 0, j = 0;
  for (const auto& ex : testset) {
    std::vector<double> p = predict(ex);
    const auto top = argmax(p);
    hard += top == ex.majority.value ? 1 : 0;
    bool in_set = ex.sublabels.empty() ? top == ex.majority.value : ex.sublabels.count(LabelId{top}) > 0;
    soft += in_set ? 1 : 0;
    j += jsd(std::span<const double>(p), std::span<const double>(ex.target));
  }
  const double n = static_cast<double>(testset.size());
  r.hard_acc = hard / n;
  r.soft_acc = soft / n;
  r.mean_jsd = j / n;
  return r;
}

inline EvalResult evaluate(const LinearModel& model, std::span<const Example> testset) {
  return evaluate_with([&](const Example& ex) { return model.predict(ex.x); }, testset);
}

// ---------------------------------------------------------------------------
// Dataset construction from a corpus
// ---------------------------------------------------------------------------

enum class Mix { dc, intersection, union_ };

inline Mix parse_mix(std::string_view raw) {
  auto s = text::lower(text::trim(raw));
  if (s == "dc") return Mix::dc;
  if (s == "intersection") return Mix::intersection;
  if (s == "union") return Mix::union_;
  throw Error(ErrorCode::invalid_argument, "mix must be dc, intersection or union");
}

// dc: DC votes only. intersection: QA votes where available, DC elsewhere.
// union: summed DC+QA counts where both exist, DC elsewhere.
inline std::vector<Example> build_examples(const Corpus& corpus, Mix mix, LossKind loss, const FeatureConfig& features,
                                           const MinorityRule& rule = {}) {
  const auto size = corpus.vocab().distribution_size();
  std::vector<Example> out;
  for (const auto& item : corpus.items()) {
    const auto* dc = corpus.votes_for(item.item_id, Method::dc);
    const auto* qa = corpus.votes_for(item.item_id, Method::qa);
    std::optional<VoteSet> vs;
    bool from_union = false;
    switch (mix) {
      case Mix::dc:
        if (dc) vs = *dc;
        break;
      case Mix::intersection:
        if (qa) vs = *qa;
        else if (dc) vs = *dc;
        break;
      case Mix::union_:
        if (dc && qa) vs = mix_union(*dc, *qa), from_union = true;
        else if (dc) vs = *dc;
        else if (qa) vs = *qa;
        break;
    }
    if (!vs || vs->total() == 0) continue;
    auto t = make_targets(*vs, loss, size, from_union);
    Example ex;
    ex.item_id = item.item_id;
    ex.x = featurize(item.s1, item.s2, features);
    ex.target = std::move(t.probs);
    ex.majority = t.majority.label;
    if (auto sub = try_filter_minority(*vs, rule)) ex.sublabels = sub->labels;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace discorel::classifier
