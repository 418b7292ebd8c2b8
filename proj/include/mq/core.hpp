#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mq {

/// Half-open time interval [start, end) in seconds. Zero length is allowed.
struct Segment {
  double start = 0.0;
  double end = 0.0;

  Segment() = default;
  Segment(double s, double e) : start(s), end(e) {
    if (s > e) throw std::invalid_argument("Segment: start > end");
    if (s < 0.0) throw std::invalid_argument("Segment: negative start");
  }

  double duration() const { return end - start; }
  double center() const { return 0.5 * (start + end); }
};

/// A segment plus category label and confidence score in [0, 1].
struct ScoredSegment {
  Segment segment;
  std::string label;
  double score = 0.0;
};

/// Candidate location on the multi-scale 1D pyramid. Regression range
/// bounds are expressed in stride units.
struct PyramidPoint {
  double time = 0.0;
  int level = 0;
  double stride = 1.0;
  double range_min = 0.0;
  double range_max = 0.0;
};

/// Distances from a point to onset and offset, in stride units.
struct RegressionOutput {
  double d_onset = 0.0;
  double d_offset = 0.0;
};

/// Temporal IoU of two segments. Zero-length union returns 0.
double tiou(const Segment& a, const Segment& b);

/// Points for all pyramid levels. Level l holds ceil(T / 2^l) points at
/// times (i + 0.5) * stride(l) with stride(l) = base_stride * 2^l.
/// Regression ranges tile [0, inf) in stride units; the default tiling is
/// [0,4), [4,8), [8,16), ... with the last level open-ended.
std::vector<PyramidPoint> generate_pyramid(int sequence_length, int num_levels,
                                           double base_stride);
std::vector<PyramidPoint> generate_pyramid(
    int sequence_length, int num_levels, double base_stride,
    const std::vector<std::pair<double, double>>& ranges);

/// Regression-range tiling used when none is supplied.
std::vector<std::pair<double, double>> default_regression_ranges(
    int num_levels);

/// Decode (center, offsets) into a segment. The start is clamped at 0;
/// the end is additionally clamped when a video duration is given.
Segment decode(const PyramidPoint& point, const RegressionOutput& reg);
Segment decode(const PyramidPoint& point, const RegressionOutput& reg,
               double video_duration);

/// Inverse of decode for a segment containing the point's time.
RegressionOutput encode(const PyramidPoint& point, const Segment& seg);

}  // namespace mq
