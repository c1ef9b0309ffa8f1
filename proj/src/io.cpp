#include "bevreproj/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace bevreproj {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace {

constexpr char kGridMagic[4] = {'B', 'V', 'R', 'G'};
constexpr char kCheckpointMagic[4] = {'B', 'V', 'C', 'K'};
constexpr std::uint32_t kGridVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  return is;
}

struct GridHeader {
  std::uint32_t rows, cols, channels, semantics;
  GroundExtent extent;
};

void write_grid_header(std::ofstream& os, const GridHeader& h) {
  os.write(kGridMagic, 4);
  write_pod(os, kGridVersion);
  write_pod(os, h.rows);
  write_pod(os, h.cols);
  write_pod(os, h.channels);
  write_pod(os, h.semantics);
  write_pod(os, h.extent.x_min);
  write_pod(os, h.extent.x_max);
  write_pod(os, h.extent.y_min);
  write_pod(os, h.extent.y_max);
}

GridHeader read_grid_header(std::ifstream& is, const std::string& origin) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kGridMagic, 4) != 0)
    throw IoError("not a grid file: " + origin);
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kGridVersion)
    throw IoError("unsupported grid file version in " + origin);
  GridHeader h{};
  h.rows = read_pod<std::uint32_t>(is);
  h.cols = read_pod<std::uint32_t>(is);
  h.channels = read_pod<std::uint32_t>(is);
  h.semantics = read_pod<std::uint32_t>(is);
  const double x_min = read_pod<double>(is);
  const double x_max = read_pod<double>(is);
  const double y_min = read_pod<double>(is);
  const double y_max = read_pod<double>(is);
  if (!is) throw IoError("truncated grid header in " + origin);
  h.extent = GroundExtent::create(x_min, x_max, y_min, y_max,
                                  static_cast<int>(h.rows),
                                  static_cast<int>(h.cols));
  return h;
}

}  // namespace

void write_grid(const std::filesystem::path& path, const BevGrid& grid) {
  auto os = open_out(path);
  write_grid_header(os, {static_cast<std::uint32_t>(grid.extent.rows),
                         static_cast<std::uint32_t>(grid.extent.cols),
                         static_cast<std::uint32_t>(grid.channels),
                         static_cast<std::uint32_t>(grid.semantics),
                         grid.extent});
  os.write(reinterpret_cast<const char*>(grid.data.data()),
           static_cast<std::streamsize>(grid.data.size() * sizeof(double)));
  if (!os) throw IoError("failed writing " + path.string());
}

BevGrid read_grid(const std::filesystem::path& path) {
  auto is = open_in(path);
  const auto h = read_grid_header(is, path.string());
  if (h.semantics == static_cast<std::uint32_t>(GridSemantics::labels))
    throw IoError("grid file holds labels, use read_labels: " + path.string());
  BevGrid grid = BevGrid::zeros(h.extent, static_cast<int>(h.channels),
                                static_cast<GridSemantics>(h.semantics));
  is.read(reinterpret_cast<char*>(grid.data.data()),
          static_cast<std::streamsize>(grid.data.size() * sizeof(double)));
  if (!is) throw IoError("truncated grid payload in " + path.string());
  return grid;
}

void write_labels(const std::filesystem::path& path, const LabelGrid& labels) {
  auto os = open_out(path);
  write_grid_header(
      os, {static_cast<std::uint32_t>(labels.extent.rows),
           static_cast<std::uint32_t>(labels.extent.cols), 1u,
           static_cast<std::uint32_t>(GridSemantics::labels), labels.extent});
  for (const auto id : labels.labels)
    write_pod(os, static_cast<std::int64_t>(id));
  if (!os) throw IoError("failed writing " + path.string());
}

LabelGrid read_labels(const std::filesystem::path& path) {
  auto is = open_in(path);
  const auto h = read_grid_header(is, path.string());
  if (h.semantics != static_cast<std::uint32_t>(GridSemantics::labels))
    throw IoError("grid file does not hold labels: " + path.string());
  LabelGrid labels = LabelGrid::zeros(h.extent);
  for (auto& id : labels.labels)
    id = static_cast<std::int32_t>(read_pod<std::int64_t>(is));
  if (!is) throw IoError("truncated label payload in " + path.string());
  return labels;
}

void write_rig(const std::filesystem::path& path, const CameraRig& rig,
               const GroundExtent& extent) {
  nlohmann::json j;
  j["extent"] = {{"x_min", extent.x_min}, {"x_max", extent.x_max},
                 {"y_min", extent.y_min}, {"y_max", extent.y_max},
                 {"rows", extent.rows},   {"cols", extent.cols}};
  for (const auto& cam : rig.cameras) {
    nlohmann::json c;
    c["name"] = cam.name;
    c["width"] = cam.intrinsics.width;
    c["height"] = cam.intrinsics.height;
    c["fx"] = cam.intrinsics.fx;
    c["fy"] = cam.intrinsics.fy;
    c["cx"] = cam.intrinsics.cx;
    c["cy"] = cam.intrinsics.cy;
    std::vector<double> rot(9);
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) rot[r * 3 + col] = cam.pose.rotation(r, col);
    c["rotation"] = rot;
    c["translation"] = {cam.pose.translation.x(), cam.pose.translation.y(),
                        cam.pose.translation.z()};
    j["cameras"].push_back(c);
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << j.dump(2) << "\n";
}

std::pair<CameraRig, GroundExtent> read_rig(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open rig config: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid rig config " + path.string() + ": " + e.what());
  }
  try {
    const auto& je = j.at("extent");
    const GroundExtent extent = GroundExtent::create(
        je.at("x_min").get<double>(), je.at("x_max").get<double>(),
        je.at("y_min").get<double>(), je.at("y_max").get<double>(),
        je.at("rows").get<int>(), je.at("cols").get<int>());
    CameraRig rig;
    for (const auto& c : j.at("cameras")) {
      const int width = c.at("width").get<int>();
      const int height = c.at("height").get<int>();
      if (width % 32 != 0)
        throw ConfigError("camera image width must be divisible by 32, got " +
                          std::to_string(width));
      const auto intr = CameraIntrinsics::create(
          c.at("fx").get<double>(), c.at("fy").get<double>(),
          c.at("cx").get<double>(), c.at("cy").get<double>(), width, height);
      const auto rot = c.at("rotation").get<std::vector<double>>();
      const auto tr = c.at("translation").get<std::vector<double>>();
      if (rot.size() != 9 || tr.size() != 3)
        throw ConfigError("rotation must have 9 entries, translation 3");
      Eigen::Matrix3d r;
      for (int rr = 0; rr < 3; ++rr)
        for (int cc = 0; cc < 3; ++cc) r(rr, cc) = rot[rr * 3 + cc];
      rig.cameras.push_back({c.at("name").get<std::string>(), intr,
                             CameraPose::create(r, {tr[0], tr[1], tr[2]})});
    }
    if (rig.cameras.empty()) throw ConfigError("rig has no cameras");
    return {rig, extent};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid rig config " + path.string() + ": " + e.what());
  } catch (const InvalidSpecError& e) {
    throw ConfigError("invalid rig config " + path.string() + ": " + e.what());
  }
}

const std::vector<double>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, data] : blobs)
    if (n == name) return &data;
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  auto os = open_out(path);
  os.write(kCheckpointMagic, 4);
  write_pod(os, kCheckpointVersion);
  write_pod(os, ck.step);
  write_pod(os, ck.config_hash);
  write_pod(os, static_cast<std::uint32_t>(ck.blobs.size()));
  for (const auto& [name, data] : ck.blobs) {
    write_pod(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(os, static_cast<std::uint64_t>(data.size()));
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  auto is = open_in(path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  if (read_pod<std::uint32_t>(is) != kCheckpointVersion)
    throw IoError("unsupported checkpoint version in " + path.string());
  Checkpoint ck;
  ck.step = read_pod<std::uint64_t>(is);
  ck.config_hash = read_pod<std::uint64_t>(is);
  const auto n = read_pod<std::uint32_t>(is);
  for (std::uint32_t k = 0; k < n; ++k) {
    const auto name_len = read_pod<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto count = read_pod<std::uint64_t>(is);
    std::vector<double> data(count);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    ck.blobs.emplace_back(std::move(name), std::move(data));
  }
  if (!is) throw IoError("truncated checkpoint " + path.string());
  return ck;
}

std::array<std::uint8_t, 3> class_color(int cls) {
  switch (cls) {
    case 0:
      return {28, 28, 28};
    case 1:
      return {0, 200, 0};  // road boundary
    case 2:
      return {40, 90, 255};  // lane divider
    case 3:
      return {230, 40, 40};  // crosswalk
    default: {
      const std::uint64_t h = mix_seed(0x636f6c6f72ULL, cls);
      return {static_cast<std::uint8_t>(64 + (h & 0x7f)),
              static_cast<std::uint8_t>(64 + ((h >> 8) & 0x7f)),
              static_cast<std::uint8_t>(64 + ((h >> 16) & 0x7f))};
    }
  }
}

void write_ppm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw IoError("ppm buffer size mismatch");
  auto os = open_out(path);
  os << "P6\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb.data()),
           static_cast<std::streamsize>(rgb.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

void write_labels_ppm(const std::filesystem::path& path,
                      const LabelGrid& labels) {
  const int h = labels.extent.rows, w = labels.extent.cols;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const auto c = class_color(labels.at(i, j));
      const std::size_t o = (static_cast<std::size_t>(i) * w + j) * 3;
      rgb[o] = c[0];
      rgb[o + 1] = c[1];
      rgb[o + 2] = c[2];
    }
  }
  write_ppm(path, w, h, rgb);
}

void write_grid_ppm(const std::filesystem::path& path, const BevGrid& grid) {
  write_labels_ppm(path, argmax_labels(grid));
}

void write_stack_ppm(const std::filesystem::path& dir, const std::string& stem,
                     const CameraImageStack& stack,
                     const std::vector<std::string>& camera_names) {
  std::filesystem::create_directories(dir);
  for (int cam = 0; cam < stack.n_cameras; ++cam) {
    std::vector<std::uint8_t> rgb(
        static_cast<std::size_t>(stack.width) * stack.height * 3, 0);
    for (int v = 0; v < stack.height; ++v) {
      for (int u = 0; u < stack.width; ++u) {
        const std::size_t pix = stack.pixel_index(cam, v, u);
        if (!stack.valid[pix]) continue;
        int best = 0;
        for (int ch = 1; ch < stack.channels; ++ch)
          if (stack.data[pix * stack.channels + ch] >
              stack.data[pix * stack.channels + best])
            best = ch;
        const auto c = class_color(best);
        const std::size_t o = (static_cast<std::size_t>(v) * stack.width + u) * 3;
        rgb[o] = c[0];
        rgb[o + 1] = c[1];
        rgb[o + 2] = c[2];
      }
    }
    const std::string name = cam < static_cast<int>(camera_names.size())
                                 ? camera_names[cam]
                                 : "cam" + std::to_string(cam);
    write_ppm(dir / (stem + "_" + name + ".ppm"), stack.width, stack.height,
              rgb);
  }
}

void write_bar_chart_ppm(const std::filesystem::path& path,
                         const std::vector<double>& fractions) {
  const int bar_w = 48, gap = 12, height = 220, pad = 10;
  const int n = static_cast<int>(fractions.size());
  const int width = pad * 2 + n * bar_w + (n - 1) * gap;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3,
                                245);
  for (int k = 0; k < n; ++k) {
    const int h =
        static_cast<int>(std::min(1.0, std::max(0.0, fractions[k])) *
                         (height - 2 * pad));
    const int x0 = pad + k * (bar_w + gap);
    const auto c = class_color(1 + (k % 3));
    for (int y = height - pad - h; y < height - pad; ++y) {
      for (int x = x0; x < x0 + bar_w; ++x) {
        const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
        rgb[o] = c[0];
        rgb[o + 1] = c[1];
        rgb[o + 2] = c[2];
      }
    }
  }
  write_ppm(path, width, height, rgb);
}

}  // namespace bevreproj
