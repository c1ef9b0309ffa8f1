#include "bevreproj/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace bevreproj {

RangeBand RangeBand::proportional(const GroundExtent& extent,
                                  double max_distance) {
  const double half_x = 0.5 * (extent.x_max - extent.x_min);
  const double half_y = 0.5 * (extent.y_max - extent.y_min);
  const double full_range = 2.0 * std::max(half_x, half_y);
  const double scale = max_distance / full_range;
  RangeBand band;
  band.max_distance = max_distance;
  band.rows = extent.rows;
  band.cols = extent.cols;
  band.cell_mask.assign(static_cast<std::size_t>(extent.rows) * extent.cols, 0);
  const double cx = extent.center_x(), cy = extent.center_y();
  const double lim_x = scale * half_x, lim_y = scale * half_y;
  for (int i = 0; i < extent.rows; ++i) {
    const double dx = std::abs(extent.cell_center_x(i) - cx);
    for (int j = 0; j < extent.cols; ++j) {
      const double dy = std::abs(extent.cell_center_y(j) - cy);
      if (dx <= lim_x && dy <= lim_y)
        band.cell_mask[static_cast<std::size_t>(i) * extent.cols + j] = 1;
    }
  }
  return band;
}

RangeBand RangeBand::from_mask(const GroundExtent& extent,
                               std::vector<std::uint8_t> mask,
                               double tag_distance) {
  require_shape(mask.size() ==
                    static_cast<std::size_t>(extent.rows) * extent.cols,
                "band mask size does not match extent");
  RangeBand band;
  band.max_distance = tag_distance;
  band.rows = extent.rows;
  band.cols = extent.cols;
  band.cell_mask = std::move(mask);
  return band;
}

long RangeBand::cell_count() const {
  return std::count_if(cell_mask.begin(), cell_mask.end(),
                       [](std::uint8_t b) { return b != 0; });
}

std::vector<RangeBand> nested_bands(const GroundExtent& extent) {
  const double half_x = 0.5 * (extent.x_max - extent.x_min);
  const double half_y = 0.5 * (extent.y_max - extent.y_min);
  const double full_range = 2.0 * std::max(half_x, half_y);
  return {RangeBand::proportional(extent, full_range / 3.0),
          RangeBand::proportional(extent, 2.0 * full_range / 3.0),
          RangeBand::proportional(extent, full_range)};
}

std::optional<double> IoUBandResult::class_iou(int cls) const {
  const auto& c = counts.at(cls);
  if (!c.defined()) return std::nullopt;
  return c.iou();
}

std::optional<double> IoUBandResult::miou() const {
  double sum = 0.0;
  int n = 0;
  for (std::size_t cls = 1; cls < counts.size(); ++cls) {
    if (!counts[cls].defined()) continue;
    sum += counts[cls].iou();
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

namespace {

void accumulate_counts(const LabelGrid& pred, const LabelGrid& gt,
                       const RangeBand& band, int n_classes,
                       const std::vector<std::uint8_t>* extra_mask,
                       std::vector<ClassCounts>& counts) {
  require_shape(pred.extent == gt.extent,
                "prediction and ground-truth grids differ in extent");
  require_shape(pred.extent.rows == band.rows && pred.extent.cols == band.cols,
                "band does not match the grid shape");
  const std::size_t cells = pred.labels.size();
  for (std::size_t cell = 0; cell < cells; ++cell) {
    if (!band.cell_mask[cell]) continue;
    if (extra_mask && !(*extra_mask)[cell]) continue;
    const int p = pred.labels[cell];
    const int g = gt.labels[cell];
    if (p < 0 || p >= n_classes || g < 0 || g >= n_classes)
      throw InvalidSpecError("label id outside [0, n_classes)");
    if (p == g) {
      ++counts[p].tp;
    } else {
      ++counts[p].fp;
      ++counts[g].fn;
    }
  }
}

std::vector<std::string> default_names(int n_classes,
                                       std::vector<std::string> names) {
  if (!names.empty()) return names;
  static const char* kDefault[] = {"background", "boundary", "lane",
                                   "crosswalk"};
  std::vector<std::string> out;
  for (int c = 0; c < n_classes; ++c) {
    if (c < 4)
      out.emplace_back(kDefault[c]);
    else
      out.push_back("class" + std::to_string(c));
  }
  return out;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "  n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << *v;
  return os.str();
}

}  // namespace

IoUBandResult iou(const LabelGrid& pred, const LabelGrid& gt,
                  const RangeBand& band, int n_classes) {
  IoUBandResult out;
  out.max_distance = band.max_distance;
  out.counts.assign(n_classes, ClassCounts{});
  accumulate_counts(pred, gt, band, n_classes, nullptr, out.counts);
  return out;
}

IoUReport miou_ranges(const LabelGrid& pred, const LabelGrid& gt, int n_classes,
                      const std::vector<std::string>& class_names) {
  IoUAccumulator acc(nested_bands(pred.extent), n_classes, class_names);
  acc.add(pred, gt);
  return acc.report();
}

IoUAccumulator::IoUAccumulator(std::vector<RangeBand> bands, int n_classes,
                               std::vector<std::string> class_names)
    : bands_(std::move(bands)),
      n_classes_(n_classes),
      class_names_(default_names(n_classes, std::move(class_names))) {
  counts_.assign(bands_.size(), std::vector<ClassCounts>(n_classes_));
}

void IoUAccumulator::add(const LabelGrid& pred, const LabelGrid& gt) {
  for (std::size_t b = 0; b < bands_.size(); ++b)
    accumulate_counts(pred, gt, bands_[b], n_classes_, nullptr, counts_[b]);
}

void IoUAccumulator::add_masked(const LabelGrid& pred, const LabelGrid& gt,
                                const std::vector<std::uint8_t>& cell_mask) {
  require_shape(cell_mask.size() == pred.labels.size(),
                "cell mask size does not match the grid");
  for (std::size_t b = 0; b < bands_.size(); ++b)
    accumulate_counts(pred, gt, bands_[b], n_classes_, &cell_mask, counts_[b]);
}

IoUReport IoUAccumulator::report() const {
  IoUReport rep;
  rep.class_names = class_names_;
  for (std::size_t b = 0; b < bands_.size(); ++b) {
    IoUBandResult r;
    r.max_distance = bands_[b].max_distance;
    r.counts = counts_[b];
    rep.bands.push_back(std::move(r));
  }
  return rep;
}

std::string IoUReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(14) << "band";
  for (std::size_t c = 1; c < class_names.size(); ++c)
    os << std::setw(12) << (class_names[c] + " IoU");
  os << std::setw(10) << "mIoU" << "\n";
  for (const auto& band : bands) {
    std::ostringstream label;
    label << "mIoU" << std::setprecision(0) << std::fixed << band.max_distance;
    os << std::setw(14) << label.str();
    for (std::size_t c = 1; c < class_names.size(); ++c)
      os << std::setw(12) << fmt_opt(band.class_iou(static_cast<int>(c)));
    os << std::setw(10) << fmt_opt(band.miou()) << "\n";
  }
  return os.str();
}

std::string IoUReport::csv() const {
  std::ostringstream os;
  os << "band_m,class,iou,tp,fp,fn\n";
  for (const auto& band : bands) {
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      const auto& cnt = band.counts[c];
      os << band.max_distance << "," << class_names[c] << ",";
      const auto v = band.class_iou(static_cast<int>(c));
      if (v)
        os << std::setprecision(9) << *v;
      else
        os << "nan";
      os << "," << cnt.tp << "," << cnt.fp << "," << cnt.fn << "\n";
    }
    os << band.max_distance << ",miou,";
    const auto m = band.miou();
    if (m)
      os << std::setprecision(9) << *m;
    else
      os << "nan";
    os << ",,,\n";
  }
  return os.str();
}

DistanceProfile distance_pixel_profile(const SamplingMap& map,
                                       const std::vector<double>& edges) {
  if (edges.size() < 2)
    throw InvalidSpecError("distance profile needs at least one interval");
  for (std::size_t k = 1; k < edges.size(); ++k)
    if (!(edges[k] > edges[k - 1]))
      throw InvalidSpecError("distance profile edges must be increasing");

  const std::size_t n_intervals = edges.size() - 1;
  DistanceProfile prof;
  prof.edges = edges;
  prof.per_camera.assign(map.n_cameras, std::vector<double>(n_intervals, 0.0));
  prof.aggregate.assign(n_intervals, 0.0);
  prof.per_camera_total.assign(map.n_cameras, 0);

  std::vector<std::vector<long>> counts(map.n_cameras,
                                        std::vector<long>(n_intervals, 0));
  for (int cam = 0; cam < map.n_cameras; ++cam) {
    for (int v = 0; v < map.height; ++v) {
      for (int u = 0; u < map.width; ++u) {
        const auto& s = map.at(cam, v, u);
        if (!s.valid) continue;
        if (s.distance < edges.front() || s.distance >= edges.back()) continue;
        const auto it =
            std::upper_bound(edges.begin(), edges.end(), s.distance);
        const std::size_t k = static_cast<std::size_t>(it - edges.begin()) - 1;
        ++counts[cam][std::min(k, n_intervals - 1)];
      }
    }
  }

  std::vector<long> agg(n_intervals, 0);
  long agg_total = 0;
  for (int cam = 0; cam < map.n_cameras; ++cam) {
    long total = 0;
    for (std::size_t k = 0; k < n_intervals; ++k) total += counts[cam][k];
    prof.per_camera_total[cam] = total;
    for (std::size_t k = 0; k < n_intervals; ++k) {
      if (total > 0)
        prof.per_camera[cam][k] =
            static_cast<double>(counts[cam][k]) / static_cast<double>(total);
      agg[k] += counts[cam][k];
    }
    agg_total += total;
  }
  for (std::size_t k = 0; k < n_intervals; ++k)
    if (agg_total > 0)
      prof.aggregate[k] =
          static_cast<double>(agg[k]) / static_cast<double>(agg_total);
  return prof;
}

std::string DistanceProfile::csv(
    const std::vector<std::string>& camera_names) const {
  std::ostringstream os;
  os << "camera,interval_lo_m,interval_hi_m,fraction\n";
  for (std::size_t cam = 0; cam < per_camera.size(); ++cam) {
    const std::string name = cam < camera_names.size()
                                 ? camera_names[cam]
                                 : "cam" + std::to_string(cam);
    for (std::size_t k = 0; k + 1 < edges.size(); ++k)
      os << name << "," << edges[k] << "," << edges[k + 1] << ","
         << std::setprecision(9) << per_camera[cam][k] << "\n";
  }
  for (std::size_t k = 0; k + 1 < edges.size(); ++k)
    os << "all," << edges[k] << "," << edges[k + 1] << ","
       << std::setprecision(9) << aggregate[k] << "\n";
  return os.str();
}

}  // namespace bevreproj
