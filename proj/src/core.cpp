#include "mq/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mq {

double tiou(const Segment& a, const Segment& b) {
  double inter = std::min(a.end, b.end) - std::max(a.start, b.start);
  if (inter <= 0.0) return 0.0;
  double uni = a.duration() + b.duration() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<std::pair<double, double>> default_regression_ranges(
    int num_levels) {
  std::vector<std::pair<double, double>> ranges;
  ranges.reserve(num_levels);
  double lo = 0.0, hi = 4.0;
  for (int l = 0; l < num_levels; ++l) {
    double upper =
        (l == num_levels - 1) ? std::numeric_limits<double>::infinity() : hi;
    ranges.emplace_back(lo, upper);
    lo = hi;
    hi *= 2.0;
  }
  return ranges;
}

std::vector<PyramidPoint> generate_pyramid(
    int sequence_length, int num_levels, double base_stride,
    const std::vector<std::pair<double, double>>& ranges) {
  if (sequence_length < 1)
    throw std::invalid_argument("generate_pyramid: sequence_length < 1");
  if (num_levels < 1)
    throw std::invalid_argument("generate_pyramid: num_levels < 1");
  if (base_stride <= 0.0)
    throw std::invalid_argument("generate_pyramid: base_stride <= 0");
  if (static_cast<int>(ranges.size()) != num_levels)
    throw std::invalid_argument("generate_pyramid: ranges/levels mismatch");

  std::vector<PyramidPoint> points;
  long long downsample = 1;
  for (int l = 0; l < num_levels; ++l) {
    if (downsample > sequence_length)
      throw std::invalid_argument("generate_pyramid: level " +
                                  std::to_string(l) + " would be empty");
    long long count = (sequence_length + downsample - 1) / downsample;
    double stride = base_stride * static_cast<double>(downsample);
    for (long long i = 0; i < count; ++i) {
      PyramidPoint p;
      p.time = (static_cast<double>(i) + 0.5) * stride;
      p.level = l;
      p.stride = stride;
      p.range_min = ranges[l].first;
      p.range_max = ranges[l].second;
      points.push_back(p);
    }
    downsample *= 2;
  }
  return points;
}

std::vector<PyramidPoint> generate_pyramid(int sequence_length, int num_levels,
                                           double base_stride) {
  return generate_pyramid(sequence_length, num_levels, base_stride,
                          default_regression_ranges(num_levels));
}

Segment decode(const PyramidPoint& point, const RegressionOutput& reg) {
  double start = point.time - reg.d_onset * point.stride;
  double end = point.time + reg.d_offset * point.stride;
  start = std::max(0.0, start);
  end = std::max(start, end);
  return Segment(start, end);
}

Segment decode(const PyramidPoint& point, const RegressionOutput& reg,
               double video_duration) {
  Segment s = decode(point, reg);
  s.end = std::min(s.end, video_duration);
  s.start = std::min(s.start, s.end);
  return s;
}

RegressionOutput encode(const PyramidPoint& point, const Segment& seg) {
  RegressionOutput r;
  r.d_onset = (point.time - seg.start) / point.stride;
  r.d_offset = (seg.end - point.time) / point.stride;
  if (r.d_onset < 0.0 || r.d_offset < 0.0)
    throw std::invalid_argument("encode: segment does not contain point time");
  return r;
}

}  // namespace mq
