#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "finegrain/common.hpp"

namespace finegrain {

struct ScoredSet {
  std::vector<std::array<double, 4>> scores;  // sigmoid outputs in [0,1]
  std::vector<std::array<int, 4>> labels;     // binary

  size_t size() const { return scores.size(); }
  void push(const std::array<double, 4>& s, const std::array<int, 4>& l) {
    scores.push_back(s);
    labels.push_back(l);
  }
};

// Non-interpolated AP: mean of precision at each positive, ranked by
// descending score with ties broken by stable input order. Returns nullopt
// when the class has no positive labels.
std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<int>& labels);

struct ClassMetrics {
  std::optional<double> ap;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // confusion matrix laid out [[TN, FP], [FN, TP]]
  long tn = 0, fp = 0, fn = 0, tp = 0;
  bool precision_zero_denominator = false;
  bool recall_zero_denominator = false;
};

struct MetricsReport {
  std::array<ClassMetrics, 4> per_class;
  double map = 0.0;
  int classes_in_map = 0;  // classes with defined AP
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::string> warnings;

  std::optional<std::pair<double, double>> map_ci;
  std::optional<std::pair<double, double>> macro_f1_ci;

  std::string to_json_text() const;
  std::string to_table() const;
};

MetricsReport summarize(const ScoredSet& set, double threshold = 0.5);

// Metric callbacks return nullopt where the metric is undefined (the
// bootstrap redraws such resamples).
using MetricFn = std::function<std::optional<double>(const ScoredSet&)>;

MetricFn map_metric();
MetricFn macro_f1_metric(double threshold = 0.5);

// Percentile interval over N-out-of-N resamples with replacement.
std::pair<double, double> bootstrap_ci(const ScoredSet& set, const MetricFn& metric,
                                       int n_resamples = 1000, double level = 0.95,
                                       uint64_t seed = 1);

struct PermutationResult {
  double p = 1.0;
  double observed = 0.0;  // mean of a - b
  long draws = 0;
  bool exact = false;
};

// Paired two-sided permutation test on per-note metric contributions.
// Exact enumeration when pairs <= max_exact_pairs, else seeded Monte-Carlo
// with the +1/(n+1) inclusion of the observed draw.
PermutationResult permutation_test(const std::vector<double>& a, const std::vector<double>& b,
                                   int max_exact_pairs = 20, long mc_draws = 10000,
                                   uint64_t seed = 1);

struct CorrelationResult {
  double cov = 0.0;
  int shift = 0;
  size_t n = 0;
  bool degenerate = false;  // zero-variance field
};

// Cyclic max-shift covariance between a standardized field and a binary
// disease vector, both already restricted to samples where the field is
// present.
CorrelationResult field_correlation(const std::vector<double>& field_values,
                                    const std::vector<int>& disease_labels);

struct CorrelationReport {
  struct Row {
    std::string field;
    std::string disease;
    double cov = 0.0;
    int shift = 0;
    size_t n = 0;
  };
  std::vector<Row> rows;
  std::string to_json_text() const;
  std::string to_table() const;
};

// Score files: one note per line, 4 floats then 4 ints, whitespace separated.
void save_scores(const std::string& path, const ScoredSet& set);
ScoredSet load_scores(const std::string& path);

}  // namespace finegrain
