#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bevreproj/renderer.hpp"

namespace bevreproj {

// Evaluation sub-area of the BEV grid. The nested default bands scale the
// full extent about its center by max_distance / full_range, where
// full_range is the span of the longer extent side; a 60 m extent thus gets
// 20/40/60 m bands covering 1/3, 2/3 and all of both axes.
struct RangeBand {
  double max_distance = 0;
  int rows = 0, cols = 0;
  std::vector<std::uint8_t> cell_mask;

  static RangeBand proportional(const GroundExtent& extent,
                                double max_distance);
  static RangeBand from_mask(const GroundExtent& extent,
                             std::vector<std::uint8_t> mask,
                             double tag_distance);

  bool at(int i, int j) const {
    return cell_mask[static_cast<std::size_t>(i) * cols + j] != 0;
  }
  long cell_count() const;
};

// Default nested evaluation bands (1/3, 2/3, full of the extent).
std::vector<RangeBand> nested_bands(const GroundExtent& extent);

struct ClassCounts {
  long long tp = 0, fp = 0, fn = 0;

  long long union_count() const { return tp + fp + fn; }
  bool defined() const { return union_count() > 0; }
  double iou() const {
    return static_cast<double>(tp) / static_cast<double>(union_count());
  }
};

// Exact integer counts per class for one band; class 0 is treated as
// background and excluded from the mean.
struct IoUBandResult {
  double max_distance = 0;
  std::vector<ClassCounts> counts;

  std::optional<double> class_iou(int cls) const;
  // Mean over defined non-background classes; empty when none is defined.
  std::optional<double> miou() const;
};

struct IoUReport {
  std::vector<std::string> class_names;
  std::vector<IoUBandResult> bands;

  std::string table() const;
  std::string csv() const;
};

// Counts computed only over band cells; classes absent from both prediction
// and ground truth in the band stay undefined.
IoUBandResult iou(const LabelGrid& pred, const LabelGrid& gt,
                  const RangeBand& band, int n_classes);

// Per-class IoU and mIoU over the default nested bands.
IoUReport miou_ranges(const LabelGrid& pred, const LabelGrid& gt,
                      int n_classes,
                      const std::vector<std::string>& class_names = {});

// Exact count accumulation across frames.
class IoUAccumulator {
 public:
  IoUAccumulator(std::vector<RangeBand> bands, int n_classes,
                 std::vector<std::string> class_names = {});

  void add(const LabelGrid& pred, const LabelGrid& gt);
  // Restricts counting to cells selected by an additional mask.
  void add_masked(const LabelGrid& pred, const LabelGrid& gt,
                  const std::vector<std::uint8_t>& cell_mask);
  IoUReport report() const;

 private:
  std::vector<RangeBand> bands_;
  int n_classes_;
  std::vector<std::string> class_names_;
  std::vector<std::vector<ClassCounts>> counts_;
};

// Share of valid pixels whose ground distance falls into each interval
// [edges[k], edges[k+1]); normalized per camera over the pixels covered by
// the intervals, plus an aggregate over all cameras.
struct DistanceProfile {
  std::vector<double> edges;
  std::vector<std::vector<double>> per_camera;  // [camera][interval]
  std::vector<double> aggregate;
  std::vector<long> per_camera_total;

  std::string csv(const std::vector<std::string>& camera_names = {}) const;
};

DistanceProfile distance_pixel_profile(const SamplingMap& map,
                                       const std::vector<double>& edges);

}  // namespace bevreproj
