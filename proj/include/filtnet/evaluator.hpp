#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "filtnet/core_model.hpp"
#include "filtnet/trainer.hpp"

namespace filtnet {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1);
  void merge(const ConfusionMatrix& other);

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t col_sum(std::size_t predicted) const;
  ConfusionMatrix transposed() const;

  const std::vector<std::uint64_t>& counts() const { return counts_; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

/// Tallies (label, prediction) pairs. Throws DomainError on a class >= c.
ConfusionMatrix confusion(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t c);

/// Multiclass MCC (Gorodkin's R_K): (c*s - sum p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2)).
/// Returns 0 when either factor of the denominator is 0. Throws DomainError on an empty matrix.
double mcc_multiclass(const ConfusionMatrix& cm);

/// One-vs-rest binary MCC for class k; 0 on a zero denominator.
double mcc_per_class(const ConfusionMatrix& cm, std::size_t k);

/// The 2x2 matrix of class k against the rest (index 0 = k, 1 = rest).
ConfusionMatrix collapse_one_vs_rest(const ConfusionMatrix& cm, std::size_t k);

struct FoldRecord {
  std::string held_out;
  std::size_t segments = 0;
  ConfusionMatrix confusion;
  double mcc = 0.0;
  double final_loss = 0.0;
};

struct EvalReport {
  ConfusionMatrix confusion;
  double overall_mcc = 0.0;
  std::vector<double> per_class_mcc;
  std::vector<std::string> class_names;
  std::vector<FoldRecord> folds;
};

EvalReport make_report(const ConfusionMatrix& cm, std::vector<std::string> class_names);

/// Predicts every segment of `ds` with `params`.
template <typename T>
std::vector<std::size_t> predict_all(const Dataset& ds, const ModelParams<T>& params);

/// Evaluates a trained model on a dataset (no training).
template <typename T>
EvalReport evaluate(const Dataset& ds, const ModelParams<T>& params);

/// Leave-one-animal-out: one fold per animal, predictions pooled into one matrix.
/// Throws ConfigError with fewer than two animals.
EvalReport loao_cv(const Dataset& ds, const Hyper& hyper, const Dims& dims, Variant variant,
                   const ProgressFn& progress = {});

/// Trains once on `train_ds`, evaluates on all of `test_ds`. Throws ConfigError
/// if the class counts or segment lengths differ.
EvalReport cross_dataset_eval(const Dataset& train_ds, const Dataset& test_ds, const Hyper& hyper, const Dims& dims,
                              Variant variant, const ProgressFn& progress = {});

/// JSON text: confusion (row-major), overall and per-class MCC, per-fold records.
std::string report_to_json(const EvalReport& report);

}  // namespace filtnet
