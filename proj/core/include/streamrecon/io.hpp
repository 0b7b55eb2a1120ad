// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "streamrecon/engine.hpp"
#include "streamrecon/geometry.hpp"

namespace sr {

// Pointmap files ("PMAP"): magic, then little-endian u32 version (1), H, W,
// channels (3 = points, 4 = points + confidence), then H*W*channels
// little-endian float32 values, row-major with channels interleaved.
inline constexpr std::uint32_t kPointmapVersion = 1;

std::vector<std::uint8_t> encode_pointmap(const Pointmap& pm, std::uint32_t channels = 4);
/// Throws kFormat naming the defect (bad magic, version, channel count,
/// truncated header or payload, trailing bytes).
Pointmap decode_pointmap(std::span<const std::uint8_t> bytes);

void write_pointmap(const Pointmap& pm, const std::filesystem::path& path,
                    std::uint32_t channels = 4);
Pointmap read_pointmap(const std::filesystem::path& path);

using Rgb = std::array<std::uint8_t, 3>;

/// ASCII PLY with float x y z and uchar red green blue per vertex.
std::string format_ply(std::span<const Vec3> points, std::span<const Rgb> colors);
void write_ply(std::span<const Vec3> points, std::span<const Rgb> colors,
               const std::filesystem::path& path);

/// "index tx ty tz qx qy qz qw", camera-to-world, shortest round-trip
/// decimal formatting.
std::string format_pose_line(std::int64_t index, const Pose& pose);

struct TrajectoryFile {
  std::vector<std::int64_t> indices;
  Trajectory trajectory;
};

/// Rejects malformed lines and quaternions whose norm is off by more than
/// 1e-6 (kParse, with the 1-based line number).
TrajectoryFile parse_trajectory(std::string_view text);
std::string format_trajectory(const Trajectory& traj, std::int64_t first_index = 1);
void write_trajectory(const Trajectory& traj, const std::filesystem::path& path,
                      std::int64_t first_index = 1);
TrajectoryFile read_trajectory(const std::filesystem::path& path);

/// Binary PPM (P6, maxval 255).
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);
Rgb to_rgb(const Image& image, std::size_t y, std::size_t x);

/// Line-oriented "key = value" engine configuration; '#' starts a comment.
/// Keys: image_h image_w patch C B heads enc_depth mlp_ratio seed tau K S_max
/// decoder_variant. Unknown or repeated keys are kParse errors.
EngineConfig parse_config(std::string_view text);
EngineConfig read_config(const std::filesystem::path& path);
std::string format_config(const EngineConfig& cfg);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

}  // namespace sr
