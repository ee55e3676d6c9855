#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trussgrasp/geometry.hpp"

namespace trussgrasp::io {

// Point clouds: "PCLD", u32 count, then count x 3 f64, all little-endian.
std::string encode_point_cloud(const PointCloud& cloud);
PointCloud decode_point_cloud(std::string_view bytes);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_point_cloud(const std::filesystem::path& path);

// Grayscale PFM ("Pf"), little-endian (scale -1.0), rows stored bottom to top.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // row-major, top row first
};

std::string encode_pfm(const FloatImage& image);
FloatImage decode_pfm(std::string_view bytes);
std::string encode_depth_pfm(const DepthImage& depth);
DepthImage decode_depth_pfm(std::string_view bytes);
void write_depth_pfm(const std::filesystem::path& path, const DepthImage& depth);
DepthImage read_depth_pfm(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// Row-major f64 array as little-endian bytes, base64 encoded.
std::string encode_f64_array(std::span<const double> values);
std::vector<double> decode_f64_array(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace trussgrasp::io
