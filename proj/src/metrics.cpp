#include "finegrain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "finegrain/corpus.hpp"
#include "json.hpp"

namespace finegrain {

using nlohmann::json;

std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ContractError("average_precision: length mismatch");
  size_t n = scores.size();
  long positives = std::accumulate(labels.begin(), labels.end(), 0L);
  if (positives == 0) return std::nullopt;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  long hits = 0;
  for (size_t rank = 0; rank < n; ++rank) {
    if (labels[order[rank]] == 1) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(positives);
}

MetricsReport summarize(const ScoredSet& set, double threshold) {
  if (set.scores.size() != set.labels.size()) throw ContractError("summarize: size mismatch");
  MetricsReport report;
  double ap_sum = 0.0;
  double p_sum = 0.0, r_sum = 0.0, f1_sum = 0.0;
  for (int cls = 0; cls < 4; ++cls) {
    ClassMetrics& cm = report.per_class[static_cast<size_t>(cls)];
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(set.size());
    labels.reserve(set.size());
    for (size_t i = 0; i < set.size(); ++i) {
      double s = set.scores[i][static_cast<size_t>(cls)];
      int l = set.labels[i][static_cast<size_t>(cls)];
      scores.push_back(s);
      labels.push_back(l);
      bool pred = s > threshold;  // strict
      if (pred && l == 1) ++cm.tp;
      if (pred && l == 0) ++cm.fp;
      if (!pred && l == 1) ++cm.fn;
      if (!pred && l == 0) ++cm.tn;
    }
    cm.ap = average_precision(scores, labels);
    if (cm.ap) {
      ap_sum += *cm.ap;
      ++report.classes_in_map;
    } else {
      report.warnings.push_back(std::string(kDiseaseNames[static_cast<size_t>(cls)]) +
                                ": no positive labels, AP undefined and skipped in mAP");
    }
    if (cm.tp + cm.fp > 0) {
      cm.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    } else {
      cm.precision_zero_denominator = true;
      report.warnings.push_back(std::string(kDiseaseNames[static_cast<size_t>(cls)]) +
                                ": no positive predictions, precision set to 0 by convention");
    }
    if (cm.tp + cm.fn > 0) {
      cm.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    } else {
      cm.recall_zero_denominator = true;
      report.warnings.push_back(std::string(kDiseaseNames[static_cast<size_t>(cls)]) +
                                ": no positive labels, recall set to 0 by convention");
    }
    cm.f1 = (cm.precision + cm.recall) > 0.0
                ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                : 0.0;
    p_sum += cm.precision;
    r_sum += cm.recall;
    f1_sum += cm.f1;
  }
  report.map = report.classes_in_map > 0 ? ap_sum / report.classes_in_map : 0.0;
  report.macro_precision = p_sum / 4.0;
  report.macro_recall = r_sum / 4.0;
  report.macro_f1 = f1_sum / 4.0;
  return report;
}

MetricFn map_metric() {
  return [](const ScoredSet& set) -> std::optional<double> {
    double sum = 0.0;
    for (int cls = 0; cls < 4; ++cls) {
      std::vector<double> scores;
      std::vector<int> labels;
      for (size_t i = 0; i < set.size(); ++i) {
        scores.push_back(set.scores[i][static_cast<size_t>(cls)]);
        labels.push_back(set.labels[i][static_cast<size_t>(cls)]);
      }
      auto ap = average_precision(scores, labels);
      if (!ap) return std::nullopt;
      sum += *ap;
    }
    return sum / 4.0;
  };
}

MetricFn macro_f1_metric(double threshold) {
  return [threshold](const ScoredSet& set) -> std::optional<double> {
    return summarize(set, threshold).macro_f1;
  };
}

std::pair<double, double> bootstrap_ci(const ScoredSet& set, const MetricFn& metric,
                                       int n_resamples, double level, uint64_t seed) {
  if (n_resamples < 100) throw ContractError("bootstrap requires n_resamples >= 100");
  if (set.size() == 0) throw ContractError("bootstrap requires a non-empty set");
  if (level <= 0.0 || level >= 1.0) throw ConfigError("bootstrap level must be in (0,1)");
  const size_t n = set.size();
  std::vector<double> stats;
  stats.reserve(static_cast<size_t>(n_resamples));
  const long max_attempts = 100 + 10L * n_resamples;
  long attempt = 0;
  while (static_cast<int>(stats.size()) < n_resamples) {
    if (attempt >= max_attempts) {
      throw std::runtime_error("bootstrap: metric undefined on too many resamples");
    }
    Rng rng = Rng::derive(seed, static_cast<uint64_t>(attempt));
    ++attempt;
    ScoredSet resample;
    resample.scores.reserve(n);
    resample.labels.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      size_t j = rng.below(n);
      resample.scores.push_back(set.scores[j]);
      resample.labels.push_back(set.labels[j]);
    }
    auto value = metric(resample);
    if (!value) continue;  // redraw
    stats.push_back(*value);
  }
  std::sort(stats.begin(), stats.end());
  auto quantile = [&](double q) {
    double idx = q * static_cast<double>(stats.size() - 1);
    size_t lo = static_cast<size_t>(idx);
    size_t hi = std::min(lo + 1, stats.size() - 1);
    double frac = idx - static_cast<double>(lo);
    return stats[lo] * (1.0 - frac) + stats[hi] * frac;
  };
  double alpha = (1.0 - level) / 2.0;
  return {quantile(alpha), quantile(1.0 - alpha)};
}

PermutationResult permutation_test(const std::vector<double>& a, const std::vector<double>& b,
                                   int max_exact_pairs, long mc_draws, uint64_t seed) {
  if (a.size() != b.size()) throw ContractError("permutation_test: paired vectors differ in length");
  if (a.empty()) throw ContractError("permutation_test: empty input");
  const size_t n = a.size();
  std::vector<double> diff(n);
  for (size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  double observed = 0.0;
  for (double d : diff) observed += d;
  observed /= static_cast<double>(n);
  double obs_abs = std::abs(observed);

  PermutationResult result;
  result.observed = observed;
  if (n <= static_cast<size_t>(max_exact_pairs)) {
    result.exact = true;
    const uint64_t patterns = 1ULL << n;
    result.draws = static_cast<long>(patterns);
    long count = 0;
    for (uint64_t mask = 0; mask < patterns; ++mask) {
      double stat = 0.0;
      for (size_t i = 0; i < n; ++i) {
        stat += (mask >> i) & 1ULL ? -diff[i] : diff[i];
      }
      stat /= static_cast<double>(n);
      if (std::abs(stat) >= obs_abs) ++count;
    }
    result.p = static_cast<double>(count) / static_cast<double>(patterns);
  } else {
    result.exact = false;
    result.draws = mc_draws;
    Rng rng(splitmix64(seed));
    long count = 0;
    for (long d = 0; d < mc_draws; ++d) {
      double stat = 0.0;
      for (size_t i = 0; i < n; ++i) {
        stat += rng.u64() & 1ULL ? -diff[i] : diff[i];
      }
      stat /= static_cast<double>(n);
      if (std::abs(stat) >= obs_abs) ++count;
    }
    // the observed draw is included in both numerator and denominator
    result.p = static_cast<double>(count + 1) / static_cast<double>(mc_draws + 1);
  }
  return result;
}

CorrelationResult field_correlation(const std::vector<double>& field_values,
                                    const std::vector<int>& disease_labels) {
  if (field_values.size() != disease_labels.size()) {
    throw ContractError("field_correlation: length mismatch");
  }
  if (field_values.empty()) throw ContractError("field_correlation requires N >= 1");
  const size_t n = field_values.size();
  CorrelationResult result;
  result.n = n;
  double mean = 0.0;
  for (double v : field_values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : field_values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (var == 0.0) {
    result.degenerate = true;
    return result;
  }
  double inv_std = 1.0 / std::sqrt(var);
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) x[i] = (field_values[i] - mean) * inv_std;
  double best = -std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += x[(i + k) % n] * static_cast<double>(disease_labels[i]);
    s /= static_cast<double>(n);
    if (s > best) {
      best = s;
      best_k = static_cast<int>(k);
    }
  }
  result.cov = best;
  result.shift = best_k;
  return result;
}

std::string MetricsReport::to_json_text() const {
  json j;
  j["per_class"] = json::array();
  for (int cls = 0; cls < 4; ++cls) {
    const ClassMetrics& cm = per_class[static_cast<size_t>(cls)];
    json c;
    c["disease"] = kDiseaseNames[static_cast<size_t>(cls)];
    if (cm.ap) {
      c["ap"] = *cm.ap;
    } else {
      c["ap"] = nullptr;
    }
    c["precision"] = cm.precision;
    c["recall"] = cm.recall;
    c["f1"] = cm.f1;
    c["confusion"] = {{cm.tn, cm.fp}, {cm.fn, cm.tp}};
    j["per_class"].push_back(c);
  }
  j["map"] = map;
  j["classes_in_map"] = classes_in_map;
  j["macro_precision"] = macro_precision;
  j["macro_recall"] = macro_recall;
  j["macro_f1"] = macro_f1;
  if (map_ci) j["map_ci"] = {map_ci->first, map_ci->second};
  if (macro_f1_ci) j["macro_f1_ci"] = {macro_f1_ci->first, macro_f1_ci->second};
  j["warnings"] = warnings;
  return j.dump(2);
}

std::string MetricsReport::to_table() const {
  std::ostringstream ss;
  ss << "disease        AP     prec   recall     F1        TN    FP    FN    TP\n";
  for (int cls = 0; cls < 4; ++cls) {
    const ClassMetrics& cm = per_class[static_cast<size_t>(cls)];
    char buf[160];
    if (cm.ap) {
      std::snprintf(buf, sizeof(buf), "%-12s %6.4f  %6.4f  %6.4f  %6.4f   %5ld %5ld %5ld %5ld\n",
                    kDiseaseNames[static_cast<size_t>(cls)], *cm.ap, cm.precision, cm.recall, cm.f1,
                    cm.tn, cm.fp, cm.fn, cm.tp);
    } else {
      std::snprintf(buf, sizeof(buf), "%-12s  undef  %6.4f  %6.4f  %6.4f   %5ld %5ld %5ld %5ld\n",
                    kDiseaseNames[static_cast<size_t>(cls)], cm.precision, cm.recall, cm.f1, cm.tn,
                    cm.fp, cm.fn, cm.tp);
    }
    ss << buf;
  }
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "mAP %.4f (over %d classes)  macro P %.4f  macro R %.4f  macro F1 %.4f\n", map,
                classes_in_map, macro_precision, macro_recall, macro_f1);
  ss << buf;
  if (map_ci) {
    std::snprintf(buf, sizeof(buf), "mAP 95%% CI [%.4f, %.4f]\n", map_ci->first, map_ci->second);
    ss << buf;
  }
  if (macro_f1_ci) {
    std::snprintf(buf, sizeof(buf), "macro F1 95%% CI [%.4f, %.4f]\n", macro_f1_ci->first,
                  macro_f1_ci->second);
    ss << buf;
  }
  for (const auto& w : warnings) ss << "warning: " << w << "\n";
  return ss.str();
}

std::string CorrelationReport::to_json_text() const {
  json j = json::array();
  for (const auto& row : rows) {
    j.push_back({{"field", row.field},
                 {"disease", row.disease},
                 {"cov", row.cov},
                 {"shift", row.shift},
                 {"n", row.n}});
  }
  return j.dump(2);
}

std::string CorrelationReport::to_table() const {
  std::ostringstream ss;
  ss << "field            disease       Cov      k*       N\n";
  for (const auto& row : rows) {
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%-16s %-11s %7.4f  %6d  %6zu\n", row.field.c_str(),
                  row.disease.c_str(), row.cov, row.shift, row.n);
    ss << buf;
  }
  return ss.str();
}

void save_scores(const std::string& path, const ScoredSet& set) {
  std::ostringstream out;
  for (size_t i = 0; i < set.size(); ++i) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %d %d %d %d\n", set.scores[i][0],
                  set.scores[i][1], set.scores[i][2], set.scores[i][3], set.labels[i][0],
                  set.labels[i][1], set.labels[i][2], set.labels[i][3]);
    out << buf;
  }
  write_text_file(path, out.str());
}

ScoredSet load_scores(const std::string& path) {
  std::istringstream in(read_text_file(path));
  ScoredSet set;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::array<double, 4> s{};
    std::array<int, 4> l{};
    if (!(ls >> s[0] >> s[1] >> s[2] >> s[3] >> l[0] >> l[1] >> l[2] >> l[3])) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": expected 4 floats and 4 ints");
    }
    set.push(s, l);
  }
  return set;
}

}  // namespace finegrain
