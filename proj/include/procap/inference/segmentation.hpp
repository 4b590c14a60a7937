#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "procap/corpus/recipe.hpp"
#include "procap/error.hpp"

namespace procap::infer {

using corpus::Segment;

struct SegmentationStrategy {
  enum class Kind { kGroundTruth, kFixedWindow, kProposals };
  Kind kind = Kind::kGroundTruth;
  std::size_t width = 170;  // fixed-window width in frames
  std::filesystem::path proposals_dir;  // proposals/<recipe id>.json

  static SegmentationStrategy ground_truth() { return {}; }
  static SegmentationStrategy window(std::size_t w) {
    if (w == 0) throw Error("window width must be at least 1 frame");
    return {Kind::kFixedWindow, w, {}};
  }
  static SegmentationStrategy proposals(std::filesystem::path dir) {
    return {Kind::kProposals, 0, std::move(dir)};
  }

  // "gt", "window:W" or "proposals:DIR".
  static SegmentationStrategy parse(const std::string& spec) {
    if (spec == "gt") return ground_truth();
    if (spec.rfind("window:", 0) == 0) {
      const std::string w = spec.substr(7);
      if (w.empty() || w.find_first_not_of("0123456789") != std::string::npos) {
        throw Error("bad window width in strategy '" + spec + "'");
      }
      return window(std::stoul(w));
    }
    if (spec.rfind("proposals:", 0) == 0 && spec.size() > 10) return proposals(spec.substr(10));
    throw Error("unknown segmentation strategy '" + spec + "' (expected gt, window:W or proposals:DIR)");
  }

  std::string describe() const {
    switch (kind) {
      case Kind::kGroundTruth: return "gt";
      case Kind::kFixedWindow: return "window:" + std::to_string(width);
      case Kind::kProposals: return "proposals:" + proposals_dir.generic_string();
    }
    return "?";
  }
};

inline double iou(const Segment& a, const Segment& b) {
  const std::size_t lo = std::max(a.start, b.start), hi = std::min(a.end, b.end);
  const std::size_t inter = hi > lo ? hi - lo : 0;
  const std::size_t uni = a.length() + b.length() - inter;
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

// Consecutive windows [i*w, (i+1)*w) up to observed_until; the last one may
// be shorter.
inline std::vector<Segment> fixed_windows(std::size_t observed_until, std::size_t width) {
  if (width == 0) throw Error("window width must be at least 1 frame");
  std::vector<Segment> out;
  for (std::size_t s = 0; s < observed_until; s += width) out.push_back({s, std::min(s + width, observed_until)});
  return out;
}

// Greedy NMS by length: the longest remaining proposal is kept and every
// proposal whose IoU with it is at least `threshold` is discarded.
inline std::vector<Segment> suppress(std::vector<Segment> props, double threshold) {
  std::stable_sort(props.begin(), props.end(), [](const Segment& a, const Segment& b) {
    if (a.length() != b.length()) return a.length() > b.length();
    return a.start < b.start;
  });
  std::vector<Segment> kept;
  for (const auto& p : props) {
    bool keep = true;
    for (const auto& k : kept) {
      if (iou(p, k) >= threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end(), [](const Segment& a, const Segment& b) { return a.start < b.start; });
  return kept;
}

// Makes time-sorted proposals disjoint. The overlap of two neighbours is
// shared in proportion to their lengths; a proposal lying entirely inside
// the previous one is dropped.
inline std::vector<Segment> split_overlaps(const std::vector<Segment>& sorted) {
  std::vector<Segment> out;
  for (Segment s : sorted) {
    if (!out.empty()) {
      Segment& prev = out.back();
      if (s.end <= prev.end) continue;
      if (s.start < prev.end) {
        const double overlap = double(prev.end - s.start);
        const double share = overlap * double(prev.length()) / double(prev.length() + s.length());
        const std::size_t cut = s.start + static_cast<std::size_t>(std::lround(share));
        prev.end = cut;
        s.start = cut;
        if (prev.end <= prev.start) out.pop_back();
        if (s.end <= s.start) continue;
      }
    }
    out.push_back(s);
  }
  return out;
}

// NMS, overlap splitting, then clipping to [0, observed_until).
inline std::vector<Segment> normalize_proposals(const std::vector<Segment>& raw, std::size_t observed_until,
                                                double iou_threshold = 0.2) {
  std::vector<Segment> valid;
  for (const auto& p : raw) {
    if (p.end > p.start) valid.push_back(p);
  }
  std::vector<Segment> out;
  for (Segment s : split_overlaps(suppress(valid, iou_threshold))) {
    if (s.start >= observed_until) continue;
    s.end = std::min(s.end, observed_until);
    out.push_back(s);
  }
  return out;
}

// Proposals file: a JSON list of [start_frame, end_frame] pairs.
inline std::vector<Segment> load_proposals(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read proposals file: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw DataError("malformed proposals file " + path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw DataError("proposals file " + path.string() + " must hold a JSON list");
  std::vector<Segment> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() || !p[1].is_number_unsigned()) {
      throw DataError("proposals file " + path.string() + ": entries must be [start, end] frame pairs");
    }
    Segment s{p[0].get<std::size_t>(), p[1].get<std::size_t>()};
    if (s.end <= s.start) throw DataError("proposals file " + path.string() + ": empty or reversed proposal");
    out.push_back(s);
  }
  return out;
}

// Context segments observed up to `observed_until`.
inline std::vector<Segment> segment_video(const corpus::VideoManifest& m, const SegmentationStrategy& strat,
                                          std::size_t observed_until, const std::string& recipe_id = {}) {
  if (observed_until > m.num_frames) {
    throw DataError("observed_until " + std::to_string(observed_until) + " exceeds the video's " +
                    std::to_string(m.num_frames) + " frames");
  }
  switch (strat.kind) {
    case SegmentationStrategy::Kind::kGroundTruth: {
      std::vector<Segment> out;
      for (const auto& s : m.segments) {
        if (s.end <= observed_until) out.push_back(s);
      }
      return out;
    }
    case SegmentationStrategy::Kind::kFixedWindow:
      return fixed_windows(observed_until, strat.width);
    case SegmentationStrategy::Kind::kProposals:
      return normalize_proposals(load_proposals(strat.proposals_dir / (recipe_id + ".json")), observed_until);
  }
  return {};
}

// Mean over ground-truth segments of the best IoU with any predicted segment.
inline double mean_iou(const std::vector<Segment>& gt, const std::vector<Segment>& pred) {
  if (gt.empty()) return 0.0;
  double total = 0;
  for (const auto& g : gt) {
    double best = 0;
    for (const auto& p : pred) best = std::max(best, iou(g, p));
    total += best;
  }
  return total / double(gt.size());
}

}  // namespace procap::infer
