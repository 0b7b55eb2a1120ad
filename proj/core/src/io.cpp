// SPDX-License-Identifier: Apache-2.0
#include "streamrecon/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <Eigen/Geometry>

#include "streamrecon/error.hpp"

namespace sr {

namespace {

constexpr char kPointmapMagic[4] = {'P', 'M', 'A', 'P'};
constexpr std::size_t kPointmapHeader = 20;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

float get_f32(std::span<const std::uint8_t> b, std::size_t off) {
  return std::bit_cast<float>(get_u32(b, off));
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string parse_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v + 0.0);
  require(ec == std::errc(), ErrorKind::kInternal, "number formatting failed");
  return std::string(buf, ptr);
}

std::vector<std::uint8_t> encode_pointmap(const Pointmap& pm, std::uint32_t channels) {
  require(channels == 3 || channels == 4, ErrorKind::kInvalidInput,
          "pointmap files hold 3 or 4 channels");
  require(pm.points.size() == pm.h * pm.w && pm.confidence.size() == pm.h * pm.w,
          ErrorKind::kShape, "pointmap buffers do not match H*W");
  std::vector<std::uint8_t> out;
  out.reserve(kPointmapHeader + pm.size() * channels * 4);
  out.insert(out.end(), std::begin(kPointmapMagic), std::end(kPointmapMagic));
  put_u32(out, kPointmapVersion);
  put_u32(out, static_cast<std::uint32_t>(pm.h));
  put_u32(out, static_cast<std::uint32_t>(pm.w));
  put_u32(out, channels);
  for (std::size_t i = 0; i < pm.size(); ++i) {
    put_f32(out, pm.points[i].x());
    put_f32(out, pm.points[i].y());
    put_f32(out, pm.points[i].z());
    if (channels == 4) put_f32(out, pm.confidence[i]);
  }
  return out;
}

Pointmap decode_pointmap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) fail(ErrorKind::kFormat, "pointmap truncated: missing magic");
  if (std::memcmp(bytes.data(), kPointmapMagic, 4) != 0) {
    fail(ErrorKind::kFormat, "pointmap has bad magic (expected \"PMAP\")");
  }
  if (bytes.size() < kPointmapHeader) fail(ErrorKind::kFormat, "pointmap truncated: short header");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kPointmapVersion) {
    fail(ErrorKind::kFormat, "pointmap has unsupported version " + std::to_string(version));
  }
  const std::uint32_t h = get_u32(bytes, 8);
  const std::uint32_t w = get_u32(bytes, 12);
  const std::uint32_t channels = get_u32(bytes, 16);
  if (channels != 3 && channels != 4) {
    fail(ErrorKind::kFormat, "pointmap has unsupported channel count " + std::to_string(channels));
  }
  const std::uint64_t expected =
      kPointmapHeader + static_cast<std::uint64_t>(h) * w * channels * 4;
  if (bytes.size() < expected) {
    fail(ErrorKind::kFormat, "pointmap truncated: payload has " +
                                 std::to_string(bytes.size() - kPointmapHeader) + " of " +
                                 std::to_string(expected - kPointmapHeader) + " bytes");
  }
  if (bytes.size() > expected) fail(ErrorKind::kFormat, "pointmap has trailing bytes");

  Pointmap pm(h, w);
  std::size_t off = kPointmapHeader;
  for (std::size_t i = 0; i < pm.size(); ++i) {
    const double x = get_f32(bytes, off);
    const double y = get_f32(bytes, off + 4);
    const double z = get_f32(bytes, off + 8);
    pm.points[i] = Vec3(x, y, z);
    off += 12;
    if (channels == 4) {
      pm.confidence[i] = get_f32(bytes, off);
      off += 4;
    }
  }
  return pm;
}

void write_pointmap(const Pointmap& pm, const std::filesystem::path& path, std::uint32_t channels) {
  write_binary_file(path, encode_pointmap(pm, channels));
}

Pointmap read_pointmap(const std::filesystem::path& path) {
  try {
    return decode_pointmap(read_binary_file(path));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kFormat) throw;
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

std::string format_ply(std::span<const Vec3> points, std::span<const Rgb> colors) {
  require(points.size() == colors.size(), ErrorKind::kShape, "point and color counts differ");
  std::string out;
  out += "ply\nformat ascii 1.0\nelement vertex " + std::to_string(points.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  char buf[64];
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const float v = static_cast<float>(points[i][k]) + 0.0f;
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
      require(ec == std::errc(), ErrorKind::kInternal, "number formatting failed");
      out.append(buf, ptr);
      out += ' ';
    }
    out += std::to_string(colors[i][0]) + ' ' + std::to_string(colors[i][1]) + ' ' +
           std::to_string(colors[i][2]) + '\n';
  }
  return out;
}

void write_ply(std::span<const Vec3> points, std::span<const Rgb> colors,
               const std::filesystem::path& path) {
  write_text_file(path, format_ply(points, colors));
}

std::string format_pose_line(std::int64_t index, const Pose& pose) {
  Eigen::Quaterniond q(pose.R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  std::string line = std::to_string(index);
  for (double v : {pose.t.x(), pose.t.y(), pose.t.z(), q.x(), q.y(), q.z(), q.w()}) {
    line += ' ';
    line += format_double(v);
  }
  return line;
}

TrajectoryFile parse_trajectory(std::string_view text) {
  TrajectoryFile out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    const auto fields = split_ws(trimmed);
    if (fields.size() != 8) {
      fail(ErrorKind::kParse, parse_error(line_no, "expected 8 fields, found " +
                                                       std::to_string(fields.size())));
    }
    std::int64_t index = 0;
    if (!parse_number(fields[0], index)) {
      fail(ErrorKind::kParse, parse_error(line_no, "bad frame index"));
    }
    double v[7];
    for (int i = 0; i < 7; ++i) {
      if (!parse_number(fields[static_cast<std::size_t>(i) + 1], v[i]) || !std::isfinite(v[i])) {
        fail(ErrorKind::kParse, parse_error(line_no, "bad number in field " + std::to_string(i + 2)));
      }
    }
    Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
    if (std::abs(q.norm() - 1.0) > 1e-6) {
      fail(ErrorKind::kParse, parse_error(line_no, "quaternion is not unit length"));
    }
    q.normalize();
    out.indices.push_back(index);
    out.trajectory.poses.push_back(Pose{q.toRotationMatrix(), Vec3(v[0], v[1], v[2])});
  }
  return out;
}

std::string format_trajectory(const Trajectory& traj, std::int64_t first_index) {
  std::string out;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    out += format_pose_line(first_index + static_cast<std::int64_t>(i), traj.poses[i]);
    out += '\n';
  }
  return out;
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path,
                      std::int64_t first_index) {
  write_text_file(path, format_trajectory(traj, first_index));
}

TrajectoryFile read_trajectory(const std::filesystem::path& path) {
  try {
    return parse_trajectory(read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kParse) throw;
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

Rgb to_rgb(const Image& image, std::size_t y, std::size_t x) {
  Rgb c{};
  for (std::size_t k = 0; k < 3; ++k) {
    const double v = std::clamp(image.at(y, x, k), 0.0, 1.0);
    c[k] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return c;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  const std::string header =
      "P6\n" + std::to_string(image.w) + " " + std::to_string(image.h) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(header.size() + image.h * image.w * 3);
  for (std::size_t y = 0; y < image.h; ++y) {
    for (std::size_t x = 0; x < image.w; ++x) {
      const Rgb c = to_rgb(image, y, x);
      bytes.insert(bytes.end(), c.begin(), c.end());
    }
  }
  write_binary_file(path, bytes);
}

Image read_ppm(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos]) != 0) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isspace(bytes[pos]) == 0) ++pos;
    return std::string(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                       bytes.begin() + static_cast<std::ptrdiff_t>(pos));
  };
  const std::string where = path.string() + ": ";
  if (next_token() != "P6") fail(ErrorKind::kFormat, where + "not a binary PPM (P6)");
  std::size_t w = 0, h = 0, maxval = 0;
  if (!parse_number(next_token(), w) || !parse_number(next_token(), h) ||
      !parse_number(next_token(), maxval) || maxval != 255) {
    fail(ErrorKind::kFormat, where + "bad PPM header");
  }
  ++pos;  // single whitespace byte before the raster
  if (bytes.size() < pos + w * h * 3) fail(ErrorKind::kFormat, where + "PPM raster truncated");
  Image img(h, w);
  for (std::size_t i = 0; i < w * h * 3; ++i) img.data[i] = bytes[pos + i] / 255.0;
  return img;
}

EngineConfig parse_config(std::string_view text) {
  EngineConfig cfg;
  std::map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kParse, parse_error(line_no, "expected key = value"));
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty() || value.empty()) {
      fail(ErrorKind::kParse, parse_error(line_no, "expected key = value"));
    }
    if (seen.count(key) != 0) {
      fail(ErrorKind::kParse, parse_error(line_no, "duplicate key '" + key + "'"));
    }
    seen[key] = line_no;

    auto as_size = [&](std::size_t& dst) {
      if (!parse_number(value, dst)) {
        fail(ErrorKind::kParse, parse_error(line_no, "'" + key + "' expects a non-negative integer"));
      }
    };
    if (key == "image_h") as_size(cfg.model.image_h);
    else if (key == "image_w") as_size(cfg.model.image_w);
    else if (key == "patch") as_size(cfg.model.patch);
    else if (key == "C") as_size(cfg.model.channels);
    else if (key == "B") as_size(cfg.model.depth);
    else if (key == "heads") as_size(cfg.model.heads);
    else if (key == "enc_depth") as_size(cfg.model.enc_depth);
    else if (key == "mlp_ratio") as_size(cfg.model.mlp_ratio);
    else if (key == "K") as_size(cfg.memory.window);
    else if (key == "S_max") as_size(cfg.memory.capacity);
    else if (key == "seed") {
      if (!parse_number(value, cfg.model.seed)) {
        fail(ErrorKind::kParse, parse_error(line_no, "'seed' expects an unsigned integer"));
      }
    } else if (key == "tau") {
      if (!parse_number(value, cfg.tau) || !std::isfinite(cfg.tau)) {
        fail(ErrorKind::kParse, parse_error(line_no, "'tau' expects a number"));
      }
    } else if (key == "decoder_variant") {
      if (value == "interleaved") cfg.variant = DecoderVariant::kInterleaved;
      else if (value == "concat") cfg.variant = DecoderVariant::kConcat;
      else fail(ErrorKind::kParse, parse_error(line_no, "decoder_variant must be interleaved or concat"));
    } else {
      fail(ErrorKind::kParse, parse_error(line_no, "unknown key '" + key + "'"));
    }
  }
  cfg.validate();
  return cfg;
}

EngineConfig read_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kParse) throw;
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

std::string format_config(const EngineConfig& cfg) {
  std::ostringstream os;
  os << "image_h = " << cfg.model.image_h << "\n"
     << "image_w = " << cfg.model.image_w << "\n"
     << "patch = " << cfg.model.patch << "\n"
     << "C = " << cfg.model.channels << "\n"
     << "B = " << cfg.model.depth << "\n"
     << "heads = " << cfg.model.heads << "\n"
     << "enc_depth = " << cfg.model.enc_depth << "\n"
     << "mlp_ratio = " << cfg.model.mlp_ratio << "\n"
     << "seed = " << cfg.model.seed << "\n"
     << "tau = " << format_double(cfg.tau) << "\n"
     << "K = " << cfg.memory.window << "\n"
     << "S_max = " << cfg.memory.capacity << "\n"
     << "decoder_variant = " << to_string(cfg.variant) << "\n";
  return os.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace sr
