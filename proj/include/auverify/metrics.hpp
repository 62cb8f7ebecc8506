#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "auverify/lrp.hpp"

namespace auverify {

struct MuResult {
  double inside = 0.0;
  double total = 0.0;
  /// Empty when the map has no positive relevance.
  std::optional<double> mu;
};

/// Share of positive relevance that falls inside the mask. Negative
/// relevance is ignored on both sides of the ratio.
inline MuResult mu(const Tensor& pixel_values, const Tensor& mask) {
  if (pixel_values.shape() != mask.shape()) {
    throw DimensionError("mu: relevance grid " + shape_str(pixel_values.shape()) +
                         " vs mask " + shape_str(mask.shape()));
  }
  MuResult r;
  for (std::size_t i = 0; i < pixel_values.size(); ++i) {
    const double v = pixel_values[i];
    if (v <= 0.0) continue;
    r.total += v;
    if (mask[i] != 0.0f) r.inside += v;
  }
  if (r.total > 0.0) r.mu = std::min(1.0, r.inside / r.total);
  return r;
}

inline MuResult mu(const RelevanceMap& map, const Tensor& mask) {
  return mu(map.pixel_values, mask);
}

/// mu normalized by the box's share of the image; 1.0 is the density of
/// relevance spread uniformly.
inline double mu_weighted(double mu_value, double box_area_fraction) {
  if (!(box_area_fraction > 0.0 && box_area_fraction <= 1.0)) {
    throw ConfigError("box area fraction must lie in (0,1], got " +
                      std::to_string(box_area_fraction));
  }
  return mu_value / box_area_fraction;
}

/// Keeps the top ceil(fraction * P) of the P positive pixels (ties to the
/// lowest flat index) and zeroes everything else.
inline Tensor top_k_filter(const Tensor& pixel_values, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("top-k fraction must lie in (0,1], got " + std::to_string(fraction));
  }
  std::vector<std::size_t> positive;
  for (std::size_t i = 0; i < pixel_values.size(); ++i) {
    if (pixel_values[i] > 0.0f) positive.push_back(i);
  }
  const auto keep = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(positive.size()) - 1e-9));
  std::stable_sort(positive.begin(), positive.end(), [&](std::size_t a, std::size_t b) {
    return pixel_values[a] > pixel_values[b];
  });
  Tensor out(pixel_values.shape());
  for (std::size_t i = 0; i < std::min(keep, positive.size()); ++i) {
    out[positive[i]] = pixel_values[positive[i]];
  }
  return out;
}

inline RelevanceMap top_k_filter(const RelevanceMap& map, double fraction) {
  RelevanceMap out = map;
  out.pixel_values = top_k_filter(map.pixel_values, fraction);
  const std::size_t plane = out.pixel_values.size();
  for (std::size_t i = 0; i < plane; ++i) {
    if (out.pixel_values[i] == 0.0f) {
      for (std::size_t c = 0; c < out.values.dim(0); ++c) out.values[c * plane + i] = 0.0f;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records and aggregation

struct MuVariant {
  enum class Kind { standard, topk };
  Kind kind = Kind::standard;
  double fraction = 1.0;

  static MuVariant standard() { return {}; }
  static MuVariant topk(double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
      throw ConfigError("top-k fraction must lie in (0,1]");
    }
    return {Kind::topk, fraction};
  }
  static MuVariant parse(const std::string& name) {
    if (name == "standard") return standard();
    if (name.starts_with("top")) {
      const std::string pct = name.substr(3);
      try {
        std::size_t used = 0;
        const double v = std::stod(pct, &used);
        if (used == pct.size()) return topk(v / 100.0);
      } catch (const std::exception&) {
      }
    }
    throw ConfigError("unknown mu variant '" + name + "' (standard, top25, topNN)");
  }

  std::string name() const {
    if (kind == Kind::standard) return "standard";
    const double pct = fraction * 100.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "top%g", pct);
    return buf;
  }

  friend bool operator==(const MuVariant&, const MuVariant&) = default;
};

struct MuRecord {
  std::string image_id;
  std::string dataset;
  std::string au;
  MuVariant variant;
  std::optional<double> mu;
  std::optional<double> mu_w;
  double inside = 0.0;
  double total = 0.0;
  double box_area_fraction = 1.0;
};

inline MuRecord make_record(std::string image_id, std::string dataset, std::string au,
                            MuVariant variant, const MuResult& result, double area_fraction) {
  MuRecord rec{std::move(image_id), std::move(dataset), std::move(au), variant,
               result.mu, std::nullopt, result.inside, result.total, area_fraction};
  if (rec.mu) rec.mu_w = mu_weighted(*rec.mu, area_fraction);
  return rec;
}

struct AggregateRow {
  std::string dataset;
  std::string au;
  std::string variant;
  double mean_mu = 0.0;
  double mean_mu_w = 0.0;
  std::size_t n = 0;
  std::size_t n_undefined = 0;

  friend bool operator==(const AggregateRow&, const AggregateRow&) = default;
};

namespace detail {
/// Order-independent mean: sorted values, compensated sum.
inline double stable_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  long double sum = 0.0L, comp = 0.0L;
  for (double v : values) {
    const long double t = sum + v;
    if (std::abs(sum) >= std::abs(static_cast<long double>(v))) comp += (sum - t) + v;
    else comp += (v - t) + sum;
    sum = t;
  }
  return static_cast<double>((sum + comp) / static_cast<long double>(values.size()));
}
}  // namespace detail

struct AggregateResult {
  std::vector<AggregateRow> rows;
  /// AUs that had records but none with a defined mu.
  std::vector<std::string> notices;
};

/// Unweighted means per (dataset, AU, variant). Records with undefined mu
/// are counted in n_undefined only.
inline AggregateResult aggregate(const std::vector<MuRecord>& records,
                                 const std::string& dataset = {}) {
  struct Acc {
    std::vector<double> mu, mu_w;
    std::size_t undefined = 0;
  };
  std::map<std::tuple<std::string, std::string, std::string>, Acc> groups;
  for (const auto& rec : records) {
    const std::string ds = dataset.empty() ? rec.dataset : dataset;
    if (!dataset.empty() && !rec.dataset.empty() && rec.dataset != dataset) continue;
    auto& acc = groups[{ds, rec.au, rec.variant.name()}];
    if (rec.mu) {
      acc.mu.push_back(*rec.mu);
      acc.mu_w.push_back(rec.mu_w.value_or(0.0));
    } else {
      ++acc.undefined;
    }
  }
  AggregateResult out;
  for (auto& [key, acc] : groups) {
    const auto& [ds, au, variant] = key;
    if (acc.mu.empty()) {
      out.notices.push_back(ds + "/" + au + "/" + variant + ": no records with defined mu (" +
                            std::to_string(acc.undefined) + " undefined)");
      continue;
    }
    out.rows.push_back({ds, au, variant, detail::stable_mean(acc.mu),
                        detail::stable_mean(acc.mu_w), acc.mu.size(), acc.undefined});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification

struct Prediction {
  std::string image_id;
  std::string dataset;
  std::set<std::string> predicted;
  std::set<std::string> truth;
};

struct TruePositive {
  std::string image_id;
  std::string au;
  friend bool operator==(const TruePositive&, const TruePositive&) = default;
};

/// (image, AU) pairs both predicted and present in ground truth.
inline std::vector<TruePositive> filter_correct(const std::vector<Prediction>& predictions) {
  std::vector<TruePositive> out;
  for (const auto& p : predictions) {
    for (const auto& au : p.predicted) {
      if (p.truth.contains(au)) out.push_back({p.image_id, au});
    }
  }
  return out;
}

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  double f1() const {
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
};

inline ConfusionCounts confusion(const std::vector<Prediction>& predictions,
                                 const std::string& au) {
  const std::string id = canonical_au(au);
  ConfusionCounts c;
  for (const auto& p : predictions) {
    const bool pred = p.predicted.contains(id);
    const bool truth = p.truth.contains(id);
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// 2TP / (2TP + FP + FN), or 0 when nothing was predicted or present.
inline double f1_score(const std::vector<Prediction>& predictions, const std::string& au) {
  return confusion(predictions, au).f1();
}

struct F1Row {
  std::string dataset;
  std::string au;
  ConfusionCounts counts;
  double f1 = 0.0;
};

inline std::vector<F1Row> f1_table(const std::vector<Prediction>& predictions,
                                   const std::vector<std::string>& labels) {
  std::map<std::string, std::vector<Prediction>> by_dataset;
  for (const auto& p : predictions) by_dataset[p.dataset].push_back(p);
  std::vector<F1Row> rows;
  for (const auto& [ds, preds] : by_dataset) {
    for (const auto& au : labels) {
      const auto c = confusion(preds, au);
      rows.push_back({ds, au, c, c.f1()});
    }
  }
  return rows;
}

}  // namespace auverify
