// SPDX-License-Identifier: Apache-2.0

#ifndef GEODEPTH_DATASET_IO_HPP
#define GEODEPTH_DATASET_IO_HPP

#include <png.h>

#include <Eigen/Core>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "geodepth/error.hpp"
#include "geodepth/geometry.hpp"
#include "geodepth/image.hpp"
#include "geodepth/normals.hpp"

namespace geodepth {

// Depth maps travel as 16-bit single-channel PNGs holding depth * 256
// (0 = no measurement), calibration as "KEY: v1 v2 ..." text, and scans as
// flat little-endian float32 quadruples x, y, z, reflectance. All three
// formats follow the KITTI depth-completion convention and are bit-exact:
// encode then decode is the identity, and so is the reverse.

namespace detail {

/// libpng error hooks: record the message and longjmp instead of printing
/// to stderr. The error_ptr is a std::string owned by the caller.
extern "C" inline void png_capture_error(png_structp png,
                                         png_const_charp msg) {
  if (void* slot = png_get_error_ptr(png)) {
    *static_cast<std::string*>(slot) = msg ? msg : "unknown error";
  }
  png_longjmp(png, 1);
}

extern "C" inline void png_ignore_warning(png_structp, png_const_charp) {}

struct PngReadHandle {
  std::FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::string message;

  ~PngReadHandle() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteHandle {
  std::FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::string message;

  ~PngWriteHandle() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

/// Decoded PNG pixels: samples in file order, still big-endian for 16-bit.
struct PngPixels {
  int width = 0;
  int height = 0;
  std::size_t stride = 0;
  std::vector<std::uint8_t> bytes;
};

/// Reads a PNG and checks it against the expected color type / bit depth.
/// Every rejection names the property that disagrees.
inline PngPixels read_png(const std::string& path, int want_color_type,
                          int want_bit_depth, const char* want_name) {
  PngReadHandle h;
  h.fp = std::fopen(path.c_str(), "rb");
  if (!h.fp) throw IoError("cannot open " + path + " for reading");

  png_byte sig[8];
  if (std::fread(sig, 1, 8, h.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path + ": not a PNG file (bad 8-byte signature)");
  }
  h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &h.message,
                                 png_capture_error, png_ignore_warning);
  if (!h.png) throw Error("libpng: read struct allocation failed");
  h.info = png_create_info_struct(h.png);
  if (!h.info) throw Error("libpng: info struct allocation failed");

  PngPixels out;
  std::vector<png_bytep> rows;
  // libpng reports errors by longjmp back here; everything it may interrupt
  // lives in `h`, `out`, and `rows`, which unwind with the throw.
  if (setjmp(png_jmpbuf(h.png))) {
    throw FormatError(path + ": libpng rejected the file while decoding (" +
                      h.message + ")");
  }
  png_init_io(h.png, h.fp);
  png_set_sig_bytes(h.png, 8);
  png_read_info(h.png, h.info);

  const int color_type = png_get_color_type(h.png, h.info);
  const int bit_depth = png_get_bit_depth(h.png, h.info);
  if (color_type != want_color_type) {
    throw FormatError(path + ": expected a " + want_name +
                      " PNG, got color type " + std::to_string(color_type));
  }
  if (bit_depth != want_bit_depth) {
    throw FormatError(path + ": expected " + std::to_string(want_bit_depth) +
                      "-bit samples, got bit depth " +
                      std::to_string(bit_depth));
  }
  out.width = static_cast<int>(png_get_image_width(h.png, h.info));
  out.height = static_cast<int>(png_get_image_height(h.png, h.info));
  if (static_cast<std::int64_t>(out.width) * out.height > 100000000) {
    throw FormatError(path + ": implausible image size " +
                      std::to_string(out.width) + "x" +
                      std::to_string(out.height));
  }
  (void)png_set_interlace_handling(h.png);
  png_read_update_info(h.png, h.info);

  out.stride = png_get_rowbytes(h.png, h.info);
  out.bytes.assign(out.stride * out.height, 0);
  rows.resize(out.height);
  for (int v = 0; v < out.height; ++v) {
    rows[v] = out.bytes.data() + out.stride * v;
  }
  png_read_image(h.png, rows.data());
  png_read_end(h.png, nullptr);
  return out;
}

/// Writes pre-assembled PNG sample bytes (16-bit samples big-endian).
inline void write_png(const std::string& path, int width, int height,
                      int color_type, int bit_depth,
                      const std::vector<std::uint8_t>& bytes,
                      std::size_t stride) {
  PngWriteHandle h;
  h.fp = std::fopen(path.c_str(), "wb");
  if (!h.fp) throw IoError("cannot open " + path + " for writing");
  h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &h.message,
                                  png_capture_error, png_ignore_warning);
  if (!h.png) throw Error("libpng: write struct allocation failed");
  h.info = png_create_info_struct(h.png);
  if (!h.info) throw Error("libpng: info struct allocation failed");

  std::vector<png_bytep> rows(height);
  for (int v = 0; v < height; ++v) {
    rows[v] = const_cast<png_bytep>(bytes.data() + stride * v);
  }
  if (setjmp(png_jmpbuf(h.png))) {
    throw IoError(path + ": libpng failed while writing (" + h.message + ")");
  }
  png_init_io(h.png, h.fp);
  png_set_IHDR(h.png, h.info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(h.png, h.info);
  png_write_image(h.png, rows.data());
  png_write_end(h.png, nullptr);
}

/// Depth -> raw 16-bit code. Nearest integer of depth*256 with ties to even
/// (the default FE_TONEAREST mode of nearbyint), so golden files are stable.
/// Values that quantize outside [1, 65535] cannot round-trip and are errors:
/// 0 is reserved for "no measurement".
inline std::uint16_t encode_depth(double depth, int u, int v,
                                  const std::string& path) {
  const double scaled = std::nearbyint(depth * 256.0);
  if (!(scaled <= 65535.0)) {
    throw InputError(path + ": depth " + std::to_string(depth) + " m at (" +
                     std::to_string(u) + ", " + std::to_string(v) +
                     ") exceeds the largest representable value 65535/256 = " +
                     "255.99609375 m");
  }
  if (!(scaled >= 1.0)) {
    throw InputError(path + ": depth " + std::to_string(depth) + " m at (" +
                     std::to_string(u) + ", " + std::to_string(v) +
                     ") quantizes to 0, which decodes as an empty cell; the " +
                     "smallest representable depth is 1/256 m");
  }
  return static_cast<std::uint16_t>(scaled);
}

inline void write_depth_codes(const std::string& path, int width, int height,
                              const std::vector<std::uint16_t>& codes) {
  const std::size_t stride = static_cast<std::size_t>(width) * 2;
  std::vector<std::uint8_t> bytes(stride * height);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(codes[i] >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(codes[i] & 0xff);
  }
  write_png(path, width, height, PNG_COLOR_TYPE_GRAY, 16, bytes, stride);
}

}  // namespace detail

/// Reads a 16-bit single-channel depth PNG. depth_m = raw / 256; raw 0 is an
/// empty cell. Anything other than 16-bit grayscale is a format error naming
/// the offending property.
inline SparseDepthMap read_depth_png(const std::string& path) {
  const detail::PngPixels px =
      detail::read_png(path, PNG_COLOR_TYPE_GRAY, 16, "single-channel");
  SparseDepthMap map(px.width, px.height);
  for (int v = 0; v < px.height; ++v) {
    const std::uint8_t* row = px.bytes.data() + px.stride * v;
    for (int u = 0; u < px.width; ++u) {
      const std::uint16_t raw = static_cast<std::uint16_t>(
          (row[2 * u] << 8) | row[2 * u + 1]);  // PNG samples are big-endian
      if (raw != 0) map.set(u, v, raw / 256.0);
    }
  }
  return map;
}

/// Inverse of read_depth_png; empty cells write raw 0. The whole map is
/// quantized before the file is created, so a failed write leaves nothing
/// behind.
inline void write_depth_png(const SparseDepthMap& map,
                            const std::string& path) {
  std::vector<std::uint16_t> codes(
      static_cast<std::size_t>(map.width()) * map.height(), 0);
  map.for_each([&](int u, int v, double depth, std::int32_t) {
    codes[static_cast<std::size_t>(v) * map.width() + u] =
        detail::encode_depth(depth, u, v, path);
  });
  detail::write_depth_codes(path, map.width(), map.height(), codes);
}

inline void write_depth_png(const DenseDepthMap& map,
                            const std::string& path) {
  std::vector<std::uint16_t> codes(
      static_cast<std::size_t>(map.width()) * map.height(), 0);
  for (int v = 0; v < map.height(); ++v) {
    for (int u = 0; u < map.width(); ++u) {
      codes[static_cast<std::size_t>(v) * map.width() + u] =
          detail::encode_depth(map.at(u, v), u, v, path);
    }
  }
  detail::write_depth_codes(path, map.width(), map.height(), codes);
}

/// "KEY: v1 v2 ..." calibration text. Values are kept as raw strings and
/// parsed on access, so lines that never parse as numbers (timestamps) are
/// harmless as long as nobody asks for them.
class KeyValueFile {
 public:
  explicit KeyValueFile(const std::string& path) : path_(path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::string line;
    while (std::getline(in, line)) {
      const std::size_t colon = line.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = trimmed(line.substr(0, colon));
      if (key.empty() || key.find_first_of(" \t") != std::string::npos) {
        continue;  // not a key line (e.g. prose containing a colon)
      }
      entries_[key] = trimmed(line.substr(colon + 1));
    }
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const {
    return entries_;
  }

  /// The key's whitespace-separated numeric values; exact count enforced.
  std::vector<double> values(const std::string& key, std::size_t count) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw FormatError(path_ + ": missing key \"" + key + "\"");
    }
    std::istringstream in(it->second);
    std::vector<double> out;
    double v = 0.0;
    while (in >> v) out.push_back(v);
    in.clear();  // extraction always ends failed; check for leftover junk
    std::string rest;
    if (in >> rest || out.size() != count) {
      throw FormatError(path_ + ": key \"" + key + "\" must hold " +
                        std::to_string(count) + " numeric values, got \"" +
                        it->second + "\"");
    }
    return out;
  }

 private:
  static std::string trimmed(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::string path_;
  std::map<std::string, std::string> entries_;
};

/// Camera model plus the LiDAR -> rectified-camera transform it pairs with.
struct Calibration {
  CameraIntrinsics intrinsics;
  RigidTransform extrinsics;
};

namespace detail {

inline Eigen::Matrix3d matrix3_row_major(const std::vector<double>& v) {
  Eigen::Matrix3d m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return m;
}

inline void check_rotation(const Eigen::Matrix3d& r, const std::string& file,
                           const std::string& key) {
  try {
    RigidTransform{r, Eigen::Vector3d::Zero()}.validate(1e-6);
  } catch (const InputError& e) {
    throw FormatError(file + ": key \"" + key + "\": " + e.what());
  }
}

}  // namespace detail

/// Parses a camera / LiDAR calibration pair in the KITTI text layout.
///
/// The camera file supplies, for camera index N (default 2):
///   P_rect_0N: 3x4 rectified projection; f_u, f_v, p_u, p_v come from its
///              left 3x3 and its fourth column folds in the rectified-frame
///              translation t = K^-1 P[:,3]
///   S_rect_0N: rectified image width and height
///   R_rect_00: rectifying rotation
/// The LiDAR file supplies R (3x3) and T (3), LiDAR -> unrectified camera.
/// The returned extrinsics compose LiDAR -> rectified camera N:
///   p_cam = R_rect R_velo p + (R_rect T_velo + t).
inline Calibration read_calibration(const std::string& cam_file,
                                    const std::string& lidar_file,
                                    int camera = 2) {
  const KeyValueFile cam(cam_file);
  const KeyValueFile velo(lidar_file);
  const std::string suffix = "_0" + std::to_string(camera);

  const std::vector<double> p = cam.values("P_rect" + suffix, 12);
  const std::vector<double> s = cam.values("S_rect" + suffix, 2);
  const std::vector<double> rect = cam.values("R_rect_00", 9);
  const std::vector<double> rv = velo.values("R", 9);
  const std::vector<double> tv = velo.values("T", 3);

  Calibration out;
  out.intrinsics.fu = p[0];
  out.intrinsics.fv = p[5];
  out.intrinsics.pu = p[2];
  out.intrinsics.pv = p[6];
  out.intrinsics.width = static_cast<int>(std::lround(s[0]));
  out.intrinsics.height = static_cast<int>(std::lround(s[1]));
  try {
    out.intrinsics.validate();
  } catch (const ConfigError& e) {
    throw FormatError(cam_file + ": " + e.what());
  }

  const Eigen::Matrix3d r_rect = detail::matrix3_row_major(rect);
  const Eigen::Matrix3d r_velo = detail::matrix3_row_major(rv);
  detail::check_rotation(r_rect, cam_file, "R_rect_00");
  detail::check_rotation(r_velo, lidar_file, "R");

  const Eigen::Vector3d t_rect(
      (p[3] - out.intrinsics.pu * p[11]) / out.intrinsics.fu,
      (p[7] - out.intrinsics.pv * p[11]) / out.intrinsics.fv, p[11]);
  out.extrinsics.rotation = r_rect * r_velo;
  out.extrinsics.translation =
      r_rect * Eigen::Vector3d(tv[0], tv[1], tv[2]) + t_rect;
  return out;
}

/// Reads a LiDAR sweep stored as little-endian float32 quadruples
/// x, y, z, reflectance. Reflectance is discarded; no line indices are
/// recovered (elevation binning reconstructs them downstream). An empty file
/// is an empty scan.
inline LidarScan read_lidar_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (buf.size() % 16 != 0) {
    throw FormatError(path + ": " + std::to_string(buf.size()) +
                      " bytes is not a whole number of 16-byte records; the " +
                      "file breaks off at byte offset " +
                      std::to_string(buf.size() - buf.size() % 16));
  }
  LidarScan scan;
  scan.points.reserve(buf.size() / 16);
  for (std::size_t off = 0; off < buf.size(); off += 16) {
    std::array<float, 3> c;
    for (int k = 0; k < 3; ++k) {
      const auto* b =
          reinterpret_cast<const unsigned char*>(buf.data() + off + 4 * k);
      const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                 (static_cast<std::uint32_t>(b[1]) << 8) |
                                 (static_cast<std::uint32_t>(b[2]) << 16) |
                                 (static_cast<std::uint32_t>(b[3]) << 24);
      c[k] = std::bit_cast<float>(bits);
      if (!std::isfinite(c[k])) {
        throw FormatError(path + ": non-finite coordinate in record " +
                          std::to_string(off / 16) + " at byte offset " +
                          std::to_string(off + 4 * k));
      }
    }
    scan.points.emplace_back(c[0], c[1], c[2]);
  }
  return scan;
}

/// Inverse of read_lidar_bin. The discarded reflectance channel writes as 0,
/// so read -> write is only bit-exact on files whose reflectance was 0;
/// write -> read always recovers the points exactly. Coordinates are stored
/// as float32, so doubles outside float range are rejected rather than
/// silently squashed to infinity.
inline void write_lidar_bin(const LidarScan& scan, const std::string& path) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(scan.points.size() * 16);
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    for (int k = 0; k < 4; ++k) {
      const double value = k < 3 ? scan.points[i][k] : 0.0;
      const float f = static_cast<float>(value);
      if (!std::isfinite(f)) {
        throw InputError(path + ": coordinate " + std::to_string(value) +
                         " of point " + std::to_string(i) +
                         " does not fit a 32-bit float");
      }
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
      bytes.push_back(static_cast<std::uint8_t>(bits & 0xff));
      bytes.push_back(static_cast<std::uint8_t>((bits >> 8) & 0xff));
      bytes.push_back(static_cast<std::uint8_t>((bits >> 16) & 0xff));
      bytes.push_back(static_cast<std::uint8_t>((bits >> 24) & 0xff));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path + ": write failed");
}

/// Writes a calibration pair readable by read_calibration. The rectifying
/// rotation is written as identity and the projection row carries no extra
/// translation column, so the full extrinsics live in the LiDAR file's
/// R and T keys. %.17g keeps the round trip exact.
inline void write_calibration(const Calibration& calib,
                              const std::string& cam_file,
                              const std::string& lidar_file, int camera = 2) {
  calib.intrinsics.validate();
  calib.extrinsics.validate();
  const auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  const std::string suffix = "_0" + std::to_string(camera);
  {
    std::ofstream out(cam_file);
    if (!out) throw IoError("cannot open " + cam_file + " for writing");
    out << "S_rect" << suffix << ": " << calib.intrinsics.width << " "
        << calib.intrinsics.height << "\n";
    out << "R_rect_00: 1 0 0 0 1 0 0 0 1\n";
    out << "P_rect" << suffix << ": " << num(calib.intrinsics.fu) << " 0 "
        << num(calib.intrinsics.pu) << " 0 0 " << num(calib.intrinsics.fv)
        << " " << num(calib.intrinsics.pv) << " 0 0 0 1 0\n";
    if (!out) throw IoError(cam_file + ": write failed");
  }
  {
    std::ofstream out(lidar_file);
    if (!out) throw IoError("cannot open " + lidar_file + " for writing");
    out << "R:";
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << " " << num(calib.extrinsics.rotation(r, c));
    }
    out << "\nT: " << num(calib.extrinsics.translation.x()) << " "
        << num(calib.extrinsics.translation.y()) << " "
        << num(calib.extrinsics.translation.z()) << "\n";
    if (!out) throw IoError(lidar_file + ": write failed");
  }
}

/// 8-bit RGB pixel of a rendered image.
struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  bool operator==(const Rgb8&) const = default;
};

using RgbImage = Image<Rgb8>;

namespace detail {

/// Fixed perceptually ordered colormap (dark violet, blue, teal, green,
/// yellow), anchors every 0.1 in t, linearly interpolated. The exact values
/// are part of the render contract so golden images do not depend on any
/// plotting library being installed.
constexpr std::array<std::array<double, 3>, 11> kDepthLut = {{
    {0.267004, 0.004874, 0.329415},
    {0.282623, 0.140926, 0.457517},
    {0.253935, 0.265254, 0.529983},
    {0.206756, 0.371758, 0.553117},
    {0.163625, 0.471133, 0.558148},
    {0.127568, 0.566949, 0.550556},
    {0.134692, 0.658636, 0.517649},
    {0.266941, 0.748751, 0.440573},
    {0.477504, 0.821444, 0.318195},
    {0.741388, 0.873449, 0.149561},
    {0.993248, 0.906157, 0.143936},
}};

inline std::uint8_t channel8(double c) {
  return static_cast<std::uint8_t>(
      std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

inline Rgb8 depth_color(double depth, double max_range) {
  const double t = std::clamp(depth / max_range, 0.0, 1.0);
  const double x = t * (kDepthLut.size() - 1);
  const std::size_t i =
      std::min(static_cast<std::size_t>(x), kDepthLut.size() - 2);
  const double f = x - static_cast<double>(i);
  Rgb8 out;
  out.r = channel8(kDepthLut[i][0] + f * (kDepthLut[i + 1][0] - kDepthLut[i][0]));
  out.g = channel8(kDepthLut[i][1] + f * (kDepthLut[i + 1][1] - kDepthLut[i][1]));
  out.b = channel8(kDepthLut[i][2] + f * (kDepthLut[i + 1][2] - kDepthLut[i][2]));
  return out;
}

}  // namespace detail

/// Colorizes depth over [0, max_range] with the fixed colormap; empty cells
/// render black.
inline RgbImage render_depth(const SparseDepthMap& map,
                             double max_range = 120.0) {
  RgbImage out(map.width(), map.height(), Rgb8{});
  map.for_each([&](int u, int v, double depth, std::int32_t) {
    out.at(u, v) = detail::depth_color(depth, max_range);
  });
  return out;
}

inline RgbImage render_depth(const DenseDepthMap& map,
                             double max_range = 120.0) {
  RgbImage out(map.width(), map.height(), Rgb8{});
  for (int v = 0; v < map.height(); ++v) {
    for (int u = 0; u < map.width(); ++u) {
      out.at(u, v) = detail::depth_color(map.at(u, v), max_range);
    }
  }
  return out;
}

/// Encodes unit normals as rgb = (n + 1) / 2, so (0, 0, -1) maps to
/// (0.5, 0.5, 0.0). Pixels without a normal render black.
inline RgbImage render_normals(const NormalMap& normals) {
  RgbImage out(normals.width(), normals.height(), Rgb8{});
  for (int v = 0; v < normals.height(); ++v) {
    for (int u = 0; u < normals.width(); ++u) {
      if (!normals.has(u, v)) continue;
      const Eigen::Vector3d& n = normals.at(u, v);
      out.at(u, v) = Rgb8{detail::channel8((n.x() + 1.0) / 2.0),
                          detail::channel8((n.y() + 1.0) / 2.0),
                          detail::channel8((n.z() + 1.0) / 2.0)};
    }
  }
  return out;
}

/// Marked pixels render white on black.
inline RgbImage render_mask(const Image<std::uint8_t>& mask) {
  RgbImage out(mask.width(), mask.height(), Rgb8{});
  for (int v = 0; v < mask.height(); ++v) {
    for (int u = 0; u < mask.width(); ++u) {
      if (mask.at(u, v) != 0) out.at(u, v) = Rgb8{255, 255, 255};
    }
  }
  return out;
}

/// Signed prediction error on ground-truth pixels, diverging blue (too
/// near) through near-white (exact) to red (too far), saturating at
/// +-span_m. Pixels without ground truth render black.
inline RgbImage render_error(const DenseDepthMap& pred,
                             const SparseDepthMap& gt, double span_m = 2.0) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw InputError("render_error: prediction is " +
                     std::to_string(pred.width()) + "x" +
                     std::to_string(pred.height()) + " but ground truth is " +
                     std::to_string(gt.width()) + "x" +
                     std::to_string(gt.height()));
  }
  if (!(span_m > 0.0)) {
    throw ConfigError("render_error: span must be positive, got " +
                      std::to_string(span_m));
  }
  static constexpr std::array<double, 3> kNear = {0.230, 0.299, 0.754};
  static constexpr std::array<double, 3> kMid = {0.865, 0.865, 0.865};
  static constexpr std::array<double, 3> kFar = {0.706, 0.016, 0.150};
  RgbImage out(gt.width(), gt.height(), Rgb8{});
  gt.for_each([&](int u, int v, double depth, std::int32_t) {
    const double t = std::clamp((pred.at(u, v) - depth) / span_m, -1.0, 1.0);
    const std::array<double, 3>& end = t < 0.0 ? kNear : kFar;
    const double f = std::abs(t);
    out.at(u, v) = Rgb8{detail::channel8(kMid[0] + f * (end[0] - kMid[0])),
                        detail::channel8(kMid[1] + f * (end[1] - kMid[1])),
                        detail::channel8(kMid[2] + f * (end[2] - kMid[2]))};
  });
  return out;
}

/// render_error for a prediction that is itself sparse: pixels missing from
/// either map render black.
inline RgbImage render_error(const SparseDepthMap& pred,
                             const SparseDepthMap& gt, double span_m = 2.0) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw InputError("render_error: prediction is " +
                     std::to_string(pred.width()) + "x" +
                     std::to_string(pred.height()) + " but ground truth is " +
                     std::to_string(gt.width()) + "x" +
                     std::to_string(gt.height()));
  }
  DenseDepthMap dense(pred.width(), pred.height(), 1.0);
  SparseDepthMap both(gt.width(), gt.height());
  gt.for_each([&](int u, int v, double depth, std::int32_t) {
    if (!pred.has(u, v)) return;
    dense.at(u, v) = pred.depth(u, v);
    both.set(u, v, depth);
  });
  return render_error(dense, both, span_m);
}

/// Writes an 8-bit RGB PNG.
inline void write_rgb_png(const RgbImage& img, const std::string& path) {
  const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
  std::vector<std::uint8_t> bytes(stride * img.height());
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const Rgb8& px = img.at(u, v);
      std::uint8_t* b = bytes.data() + stride * v + 3 * u;
      b[0] = px.r;
      b[1] = px.g;
      b[2] = px.b;
    }
  }
  detail::write_png(path, img.width(), img.height(), PNG_COLOR_TYPE_RGB, 8,
                    bytes, stride);
}

/// Reads an 8-bit RGB PNG (round-trip partner of write_rgb_png).
inline RgbImage read_rgb_png(const std::string& path) {
  const detail::PngPixels px =
      detail::read_png(path, PNG_COLOR_TYPE_RGB, 8, "RGB");
  RgbImage out(px.width, px.height, Rgb8{});
  for (int v = 0; v < px.height; ++v) {
    const std::uint8_t* row = px.bytes.data() + px.stride * v;
    for (int u = 0; u < px.width; ++u) {
      out.at(u, v) = Rgb8{row[3 * u], row[3 * u + 1], row[3 * u + 2]};
    }
  }
  return out;
}

}  // namespace geodepth

#endif  // GEODEPTH_DATASET_IO_HPP
