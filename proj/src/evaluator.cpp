#include "filtnet/evaluator.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "filtnet/featurizer.hpp"

namespace filtnet {

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t n) {
  if (truth >= classes_ || predicted >= classes_) throw DomainError("class index outside confusion matrix");
  counts_[truth * classes_ + predicted] += n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw DimensionError("confusion matrices differ in size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto v : counts_) s += v;
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t k = 0; k < classes_; ++k) s += at(k, k);
  return s;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < classes_; ++t) s += at(t, predicted);
  return s;
}

ConfusionMatrix ConfusionMatrix::transposed() const {
  ConfusionMatrix out(classes_);
  for (std::size_t t = 0; t < classes_; ++t) {
    for (std::size_t p = 0; p < classes_; ++p) out.counts_[p * classes_ + t] = at(t, p);
  }
  return out;
}

ConfusionMatrix confusion(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t c) {
  if (preds.size() != labels.size()) throw ShapeError("prediction and label counts differ");
  ConfusionMatrix cm(c);
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(labels[i], preds[i]);
  return cm;
}

double mcc_multiclass(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (cm.classes() == 0 || total == 0) throw DomainError("MCC of an empty confusion matrix");
  // Long double keeps s^2 exact for any realistic count.
  const long double s = static_cast<long double>(total);
  const long double c = static_cast<long double>(cm.trace());
  long double pt = 0, pp = 0, tt = 0;
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    const long double p = static_cast<long double>(cm.col_sum(k));
    const long double t = static_cast<long double>(cm.row_sum(k));
    pt += p * t;
    pp += p * p;
    tt += t * t;
  }
  const long double den_pred = s * s - pp;
  const long double den_true = s * s - tt;
  if (den_pred == 0 || den_true == 0) return 0.0;
  const long double r = (c * s - pt) / std::sqrt(den_pred * den_true);
  return static_cast<double>(std::clamp(r, -1.0L, 1.0L));
}

ConfusionMatrix collapse_one_vs_rest(const ConfusionMatrix& cm, std::size_t k) {
  if (k >= cm.classes()) throw DomainError("class index outside confusion matrix");
  ConfusionMatrix out(2);
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    for (std::size_t p = 0; p < cm.classes(); ++p) {
      out.add(t == k ? 0 : 1, p == k ? 0 : 1, cm.at(t, p));
    }
  }
  return out;
}

double mcc_per_class(const ConfusionMatrix& cm, std::size_t k) {
  if (cm.total() == 0) return 0.0;
  return mcc_multiclass(collapse_one_vs_rest(cm, k));
}

EvalReport make_report(const ConfusionMatrix& cm, std::vector<std::string> class_names) {
  EvalReport r;
  r.confusion = cm;
  r.overall_mcc = cm.total() > 0 ? mcc_multiclass(cm) : 0.0;
  for (std::size_t k = 0; k < cm.classes(); ++k) r.per_class_mcc.push_back(mcc_per_class(cm, k));
  r.class_names = std::move(class_names);
  return r;
}

template <typename T>
std::vector<std::size_t> predict_all(const Dataset& ds, const ModelParams<T>& params) {
  std::vector<std::size_t> preds;
  preds.reserve(ds.segments.size());
  ForwardCache<T> cache;
  for (const auto& s : ds.segments) {
    const auto f = compute_features(s, params, cache);
    const auto logits = mlp_logits<T>(f, params);
    preds.push_back(argmax<T>(logits));
  }
  return preds;
}

namespace {

std::vector<std::size_t> labels_of(const Dataset& ds) {
  std::vector<std::size_t> labels;
  labels.reserve(ds.segments.size());
  for (const auto& s : ds.segments) labels.push_back(s.label);
  return labels;
}

}  // namespace

template <typename T>
EvalReport evaluate(const Dataset& ds, const ModelParams<T>& params) {
  if (ds.class_count() != params.dims.c) throw ConfigError("dataset and model disagree on class count");
  const auto preds = predict_all(ds, params);
  return make_report(confusion(preds, labels_of(ds), params.dims.c), ds.class_names);
}

EvalReport loao_cv(const Dataset& ds, const Hyper& hyper, const Dims& dims, Variant variant,
                   const ProgressFn& progress) {
  const auto animals = ds.animals();
  if (animals.size() < 2) throw ConfigError("leave-one-animal-out needs at least two animals");

  ConfusionMatrix pooled(ds.class_count());
  std::vector<FoldRecord> folds;
  for (const auto& animal : animals) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < ds.segments.size(); ++i) {
      (ds.segments[i].animal_id == animal ? test_idx : train_idx).push_back(i);
    }
    const Dataset train_set = ds.subset(train_idx);
    const Dataset test_set = ds.subset(test_idx);
    const auto trained = train<float>(train_set, hyper, dims, variant, progress);
    const auto preds = predict_all(test_set, trained.params);

    FoldRecord fold;
    fold.held_out = animal;
    fold.segments = test_set.segments.size();
    fold.confusion = confusion(preds, labels_of(test_set), ds.class_count());
    fold.mcc = fold.confusion.total() > 0 ? mcc_multiclass(fold.confusion) : 0.0;
    fold.final_loss = trained.loss_history.empty() ? 0.0 : trained.loss_history.back();
    pooled.merge(fold.confusion);
    folds.push_back(std::move(fold));
  }
  EvalReport report = make_report(pooled, ds.class_names);
  report.folds = std::move(folds);
  return report;
}

EvalReport cross_dataset_eval(const Dataset& train_ds, const Dataset& test_ds, const Hyper& hyper, const Dims& dims,
                              Variant variant, const ProgressFn& progress) {
  if (train_ds.class_count() != test_ds.class_count()) throw ConfigError("datasets have different class counts");
  if (train_ds.segment_length != test_ds.segment_length) throw ConfigError("datasets have different segment lengths");
  const auto trained = train<float>(train_ds, hyper, dims, variant, progress);
  return evaluate(test_ds, trained.params);
}

std::string report_to_json(const EvalReport& report) {
  using nlohmann::json;
  auto matrix = [](const ConfusionMatrix& cm) {
    json rows = json::array();
    for (std::size_t t = 0; t < cm.classes(); ++t) {
      json row = json::array();
      for (std::size_t p = 0; p < cm.classes(); ++p) row.push_back(cm.at(t, p));
      rows.push_back(row);
    }
    return rows;
  };
  json j;
  j["classes"] = report.class_names;
  j["confusion"] = matrix(report.confusion);
  j["total"] = report.confusion.total();
  j["overall_mcc"] = report.overall_mcc;
  j["per_class_mcc"] = report.per_class_mcc;
  json folds = json::array();
  for (const auto& f : report.folds) {
    folds.push_back({{"held_out", f.held_out},
                     {"segments", f.segments},
                     {"mcc", f.mcc},
                     {"final_loss", f.final_loss},
                     {"confusion", matrix(f.confusion)}});
  }
  j["folds"] = folds;
  return j.dump(2);
}

template std::vector<std::size_t> predict_all<float>(const Dataset&, const ModelParams<float>&);
template std::vector<std::size_t> predict_all<double>(const Dataset&, const ModelParams<double>&);
template EvalReport evaluate<float>(const Dataset&, const ModelParams<float>&);
template EvalReport evaluate<double>(const Dataset&, const ModelParams<double>&);

}  // namespace filtnet
