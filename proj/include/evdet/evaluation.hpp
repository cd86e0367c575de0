#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdet/detections.hpp"
#include "evdet/errors.hpp"
#include "evdet/geometry.hpp"

namespace evdet {

inline constexpr double kDefaultEvalIou = 0.5;
inline constexpr double kDefaultMinHeight = 25.0;
inline constexpr double kDefaultFusionIou = 0.4;

struct MatchOptions {
  double iou_threshold = kDefaultEvalIou;
  double min_height = kDefaultMinHeight;
  /// KITTI-style don't-care: a detection that would be a false positive but
  /// overlaps a ground truth removed by the height filter (IoU >= threshold)
  /// is dropped from the ranking instead.
  bool ignore_on_filtered_gt = false;
};

/// One ranked detection. `frame` indexes the detection input, `box` the box
/// within it; `gt` indexes the matched ground-truth box within its frame's
/// original (unfiltered) list.
struct RankedDetection {
  std::size_t frame = 0;
  std::size_t box = 0;
  double confidence = 0;
  bool true_positive = false;
  std::optional<std::size_t> gt;
};

struct MatchResult {
  std::vector<RankedDetection> ranked;  ///< confidence descending
  std::size_t gt_count = 0;             ///< after height filtering

  std::size_t tp() const {
    return std::size_t(std::count_if(ranked.begin(), ranked.end(),
                                     [](const RankedDetection& d) { return d.true_positive; }));
  }
  std::size_t fp() const { return ranked.size() - tp(); }
};

namespace detail {

struct GtFrame {
  const DetectionSet* set = nullptr;
  std::vector<std::size_t> kept;     // indices passing the height filter
  std::vector<std::size_t> dropped;  // indices removed by it
};

inline std::unordered_map<std::string, GtFrame> index_ground_truth(const std::vector<DetectionSet>& gts,
                                                                   double min_height) {
  std::unordered_map<std::string, GtFrame> frames;
  for (const auto& g : gts) {
    auto [it, inserted] = frames.try_emplace(g.frame_id);
    if (!inserted) throw InputError("duplicate ground-truth frame " + g.frame_id);
    it->second.set = &g;
    for (std::size_t i = 0; i < g.boxes.size(); ++i)
      (g.boxes[i].height() >= min_height ? it->second.kept : it->second.dropped).push_back(i);
  }
  return frames;
}

inline void check_iou_threshold(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InputError("IoU threshold must be in [0,1]");
}

}  // namespace detail

/// Greedy confidence-ranked matching. Ground truths and detections shorter
/// than `min_height` are removed first. Each detection, in confidence order
/// (ties by frame, then box order), takes the unmatched ground truth of its
/// own frame with the highest IoU (ties to the lower index) when that IoU is
/// >= the threshold; otherwise it is a false positive.
inline MatchResult match_detections(const std::vector<DetectionSet>& dets,
                                    const std::vector<DetectionSet>& gts,
                                    const MatchOptions& options = {}) {
  detail::check_iou_threshold(options.iou_threshold);
  auto gt_frames = detail::index_ground_truth(gts, options.min_height);

  MatchResult result;
  for (const auto& [id, frame] : gt_frames) result.gt_count += frame.kept.size();

  std::vector<RankedDetection> candidates;
  for (std::size_t f = 0; f < dets.size(); ++f)
    for (std::size_t b = 0; b < dets[f].boxes.size(); ++b)
      if (dets[f].boxes[b].height() >= options.min_height)
        candidates.push_back({f, b, dets[f].boxes[b].confidence, false, std::nullopt});
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const RankedDetection& a, const RankedDetection& b) {
                     return a.confidence > b.confidence;
                   });

  std::unordered_map<std::string, std::vector<bool>> taken;
  result.ranked.reserve(candidates.size());
  for (auto& cand : candidates) {
    const DetectionSet& det_set = dets[cand.frame];
    const BoundingBox& box = det_set.boxes[cand.box];
    auto it = gt_frames.find(det_set.frame_id);
    if (it != gt_frames.end()) {
      const detail::GtFrame& frame = it->second;
      auto& used = taken[det_set.frame_id];
      used.resize(frame.set->boxes.size(), false);

      double best_iou = -1;
      std::optional<std::size_t> best;
      for (std::size_t g : frame.kept) {
        if (used[g]) continue;
        const double v = iou(box, frame.set->boxes[g]);
        if (v > best_iou) {
          best_iou = v;
          best = g;
        }
      }
      if (best && best_iou > 0 && best_iou >= options.iou_threshold) {
        used[*best] = true;
        cand.true_positive = true;
        cand.gt = best;
      } else if (options.ignore_on_filtered_gt &&
                 std::any_of(frame.dropped.begin(), frame.dropped.end(), [&](std::size_t g) {
                   const double v = iou(box, frame.set->boxes[g]);
                   return v > 0 && v >= options.iou_threshold;
                 })) {
        continue;
      }
    }
    result.ranked.push_back(cand);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Precision / recall

enum class ApInterpolation {
  AllPoint,     ///< area under the monotonized PR curve
  ElevenPoint,  ///< mean of interpolated precision at recall 0, 0.1, ..., 1
};

struct PRPoint {
  double recall = 0;
  double precision = 0;
};

struct PRCurve {
  std::vector<PRPoint> points;  ///< one per ranked detection
  double average_precision = 0;
};

inline PRCurve pr_curve(const MatchResult& m, ApInterpolation interp = ApInterpolation::AllPoint) {
  if (m.gt_count == 0) throw UndefinedMetricError("average precision undefined without ground truth");
  PRCurve curve;
  const double total = double(m.gt_count);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < m.ranked.size(); ++k) {
    if (m.ranked[k].true_positive) ++tp;
    curve.points.push_back({double(tp) / total, double(tp) / double(k + 1)});
  }

  // Precision envelope: best precision at this recall or beyond.
  std::vector<double> envelope(curve.points.size());
  double best = 0;
  for (std::size_t k = curve.points.size(); k-- > 0;) {
    best = std::max(best, curve.points[k].precision);
    envelope[k] = best;
  }

  if (interp == ApInterpolation::AllPoint) {
    double prev_recall = 0, ap = 0;
    for (std::size_t k = 0; k < curve.points.size(); ++k) {
      ap += (curve.points[k].recall - prev_recall) * envelope[k];
      prev_recall = curve.points[k].recall;
    }
    curve.average_precision = ap;
  } else {
    double sum = 0;
    for (int i = 0; i <= 10; ++i) {
      const double r = i / 10.0;
      const auto it = std::find_if(curve.points.begin(), curve.points.end(),
                                   [&](const PRPoint& p) { return p.recall >= r - 1e-12; });
      if (it != curve.points.end()) sum += envelope[std::size_t(it - curve.points.begin())];
    }
    curve.average_precision = sum / 11.0;
  }
  curve.average_precision = std::clamp(curve.average_precision, 0.0, 1.0);
  return curve;
}

/// Throws UndefinedMetricError when there is no ground truth.
inline double average_precision(const MatchResult& m,
                                ApInterpolation interp = ApInterpolation::AllPoint) {
  return pr_curve(m, interp).average_precision;
}

// ---------------------------------------------------------------------------
// Fraction of ground truth detected, confidence ignored

/// Which filtered ground truths are covered. `covered` is flat over the
/// ground-truth input: frame by frame, kept boxes in order.
struct Coverage {
  std::vector<bool> covered;
  std::size_t count() const { return std::size_t(std::count(covered.begin(), covered.end(), true)); }
  std::size_t gt_count() const { return covered.size(); }
  double fraction() const {
    if (covered.empty()) throw UndefinedMetricError("fraction undefined without ground truth");
    return double(count()) / double(covered.size());
  }
};

/// Within each frame, (detection, ground truth) pairs with IoU >= threshold
/// are matched one-to-one, greedily by IoU descending (ties by detection
/// index, then ground-truth index).
inline Coverage ground_truth_coverage(const std::vector<DetectionSet>& dets,
                                      const std::vector<DetectionSet>& gts, double iou_threshold,
                                      double min_height) {
  detail::check_iou_threshold(iou_threshold);
  std::unordered_map<std::string, std::vector<const DetectionSet*>> det_frames;
  for (const auto& d : dets) det_frames[d.frame_id].push_back(&d);

  Coverage cov;
  std::unordered_map<std::string, bool> seen;
  for (const auto& g : gts) {
    if (!seen.emplace(g.frame_id, true).second) throw InputError("duplicate ground-truth frame " + g.frame_id);
    std::vector<const BoundingBox*> truth;
    for (const auto& b : g.boxes)
      if (b.height() >= min_height) truth.push_back(&b);
    std::vector<const BoundingBox*> found;
    if (auto it = det_frames.find(g.frame_id); it != det_frames.end())
      for (const DetectionSet* d : it->second)
        for (const auto& b : d->boxes)
          if (b.height() >= min_height) found.push_back(&b);

    struct Pair {
      double iou;
      std::size_t det, gt;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < found.size(); ++i)
      for (std::size_t j = 0; j < truth.size(); ++j)
        if (const double v = iou(*found[i], *truth[j]); v >= iou_threshold && v > 0)
          pairs.push_back({v, i, j});
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const Pair& a, const Pair& b) { return a.iou > b.iou; });

    std::vector<bool> det_used(found.size(), false), gt_used(truth.size(), false);
    for (const auto& p : pairs) {
      if (det_used[p.det] || gt_used[p.gt]) continue;
      det_used[p.det] = gt_used[p.gt] = true;
    }
    cov.covered.insert(cov.covered.end(), gt_used.begin(), gt_used.end());
  }
  return cov;
}

inline double fraction_detected(const std::vector<DetectionSet>& dets,
                                const std::vector<DetectionSet>& gts,
                                double iou_threshold = kDefaultEvalIou,
                                double min_height = kDefaultMinHeight) {
  return ground_truth_coverage(dets, gts, iou_threshold, min_height).fraction();
}

struct SetAnalysis {
  std::size_t gt_count = 0;
  std::size_t count_a = 0, count_b = 0, count_intersection = 0, count_union = 0;
  double frac_a = 0, frac_b = 0, frac_intersection = 0, frac_union = 0;
};

/// Ground truths detected by A, by B, by both and by either.
inline SetAnalysis set_analysis(const std::vector<DetectionSet>& dets_a,
                                const std::vector<DetectionSet>& dets_b,
                                const std::vector<DetectionSet>& gts,
                                double iou_threshold = kDefaultEvalIou,
                                double min_height = kDefaultMinHeight) {
  const Coverage a = ground_truth_coverage(dets_a, gts, iou_threshold, min_height);
  const Coverage b = ground_truth_coverage(dets_b, gts, iou_threshold, min_height);
  SetAnalysis s;
  s.gt_count = a.gt_count();
  if (s.gt_count == 0) throw UndefinedMetricError("fraction undefined without ground truth");
  for (std::size_t i = 0; i < s.gt_count; ++i) {
    s.count_a += a.covered[i];
    s.count_b += b.covered[i];
    s.count_intersection += a.covered[i] && b.covered[i];
    s.count_union += a.covered[i] || b.covered[i];
  }
  // Fractions live on a shared 2^-40 grid built from the exclusive parts
  // (only a, only b, both, neither) so that a + b == union + intersection holds
  // exactly in floating point. Largest-remainder rounding keeps the parts
  // summing to one; each fraction is within 2^-39 of the exact ratio.
  constexpr std::uint64_t kGrid = std::uint64_t(1) << 40;
  const std::array<std::size_t, 4> parts{s.count_a - s.count_intersection, s.count_b - s.count_intersection,
                                         s.count_intersection, s.gt_count - s.count_union};
  std::array<std::uint64_t, 4> k{};
  std::array<std::pair<std::uint64_t, std::size_t>, 4> rem{};
  std::uint64_t assigned = 0;
  for (std::size_t j = 0; j < 4; ++j) {
    const auto scaled = static_cast<unsigned __int128>(parts[j]) * kGrid;
    k[j] = std::uint64_t(scaled / s.gt_count);
    rem[j] = {std::uint64_t(scaled % s.gt_count), j};
    assigned += k[j];
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t j = 0; assigned < kGrid; ++j, ++assigned) ++k[rem[j].second];
  const double q = 1.0 / double(kGrid);
  s.frac_a = double(k[0] + k[2]) * q;
  s.frac_b = double(k[1] + k[2]) * q;
  s.frac_intersection = double(k[2]) * q;
  s.frac_union = double(k[0] + k[1] + k[2]) * q;
  return s;
}

// ---------------------------------------------------------------------------
// Fusion

/// Pools both detectors' boxes for one frame (source tags kept) and removes
/// duplicates with NMS.
inline DetectionSet fuse_detections(const DetectionSet& a, const DetectionSet& b,
                                    double nms_iou = kDefaultFusionIou) {
  DetectionSet pooled{a.frame_id.empty() ? b.frame_id : a.frame_id, a.frame_id.empty() ? b.t : a.t,
                      {}, {}};
  for (const DetectionSet* s : {&a, &b})
    for (BoundingBox box : s->boxes) {
      if (box.source.empty()) box.source = s->source;
      pooled.boxes.push_back(std::move(box));
    }
  if (!a.source.empty() && !b.source.empty())
    pooled.source = a.source + "+" + b.source;
  else
    pooled.source = a.source + b.source;
  pooled.boxes = nms(pooled.boxes, nms_iou);
  return pooled;
}

/// Frame-wise fusion; frames are matched by id, frames present in only one
/// input are fused with an empty set.
inline std::vector<DetectionSet> fuse_detections(const std::vector<DetectionSet>& a,
                                                 const std::vector<DetectionSet>& b,
                                                 double nms_iou = kDefaultFusionIou) {
  std::unordered_map<std::string, const DetectionSet*> b_by_id;
  for (const auto& s : b) b_by_id.emplace(s.frame_id, &s);
  const std::string b_source = b.empty() ? "" : b.front().source;
  const std::string a_source = a.empty() ? "" : a.front().source;

  std::vector<DetectionSet> out;
  std::unordered_map<std::string, bool> done;
  for (const auto& s : a) {
    auto it = b_by_id.find(s.frame_id);
    const DetectionSet empty{s.frame_id, s.t, {}, b_source};
    out.push_back(fuse_detections(s, it != b_by_id.end() ? *it->second : empty, nms_iou));
    done[s.frame_id] = true;
  }
  for (const auto& s : b)
    if (!done.count(s.frame_id))
      out.push_back(fuse_detections(DetectionSet{s.frame_id, s.t, {}, a_source}, s, nms_iou));
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct ThresholdReport {
  double iou = 0;
  std::optional<double> ap;  ///< nullopt when there is no ground truth
  std::size_t tp = 0, fp = 0, gt_count = 0;
  std::vector<PRPoint> pr;
};

inline ThresholdReport evaluate_at(const std::vector<DetectionSet>& dets,
                                   const std::vector<DetectionSet>& gts, MatchOptions options,
                                   ApInterpolation interp = ApInterpolation::AllPoint) {
  const MatchResult m = match_detections(dets, gts, options);
  ThresholdReport r{options.iou_threshold, std::nullopt, m.tp(), m.fp(), m.gt_count, {}};
  if (m.gt_count > 0) {
    PRCurve curve = pr_curve(m, interp);
    r.ap = curve.average_precision;
    r.pr = std::move(curve.points);
  }
  return r;
}

inline nlohmann::ordered_json to_json(const ThresholdReport& r) {
  nlohmann::ordered_json j;
  j["iou"] = r.iou;
  j["ap"] = r.ap ? nlohmann::ordered_json(*r.ap) : nlohmann::ordered_json(nullptr);
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["gt_count"] = r.gt_count;
  auto pr = nlohmann::ordered_json::array();
  for (const auto& p : r.pr) pr.push_back({p.recall, p.precision});
  j["pr_curve"] = std::move(pr);
  return j;
}

inline nlohmann::ordered_json to_json(const SetAnalysis& s) {
  nlohmann::ordered_json j;
  j["frac_a"] = s.frac_a;
  j["frac_b"] = s.frac_b;
  j["frac_intersection"] = s.frac_intersection;
  j["frac_union"] = s.frac_union;
  j["gt_count"] = s.gt_count;
  return j;
}

}  // namespace evdet
