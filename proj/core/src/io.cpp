#include "trussgrasp/io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "trussgrasp/error.hpp"

namespace trussgrasp::io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written assuming a little-endian host");

template <typename T>
void append_raw(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T read_raw(std::string_view bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

}  // namespace

std::string encode_point_cloud(const PointCloud& cloud) {
  std::string out = "PCLD";
  append_raw<std::uint32_t>(out, static_cast<std::uint32_t>(cloud.size()));
  out.reserve(out.size() + cloud.size() * 24);
  for (const auto& p : cloud.points) {
    append_raw(out, p.x());
    append_raw(out, p.y());
    append_raw(out, p.z());
  }
  return out;
}

PointCloud decode_point_cloud(std::string_view bytes) {
  if (bytes.size() < 8 || bytes.substr(0, 4) != "PCLD")
    fail(ErrorKind::Io, "not a PCLD point cloud");
  const auto count = read_raw<std::uint32_t>(bytes, 4);
  if (bytes.size() != 8 + static_cast<std::size_t>(count) * 24)
    fail(ErrorKind::Io, "PCLD payload size does not match its point count");
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t off = 8 + i * 24;
    cloud.points.emplace_back(read_raw<double>(bytes, off), read_raw<double>(bytes, off + 8),
                              read_raw<double>(bytes, off + 16));
  }
  return cloud;
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  write_file(path, encode_point_cloud(cloud));
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  return decode_point_cloud(read_file(path));
}

std::string encode_pfm(const FloatImage& image) {
  std::ostringstream header;
  header << "Pf\n" << image.width << ' ' << image.height << "\n-1.0\n";
  std::string out = header.str();
  out.reserve(out.size() + image.values.size() * 4);
  for (int row = image.height - 1; row >= 0; --row)
    for (int col = 0; col < image.width; ++col)
      append_raw(out, image.values[static_cast<std::size_t>(row) * image.width + col]);
  return out;
}

FloatImage decode_pfm(std::string_view bytes) {
  // Header: three whitespace-separated tokens after the magic, then one
  // whitespace byte before the raster.
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  if (token() != "Pf") fail(ErrorKind::Io, "only grayscale PFM (Pf) is supported");
  FloatImage image;
  double scale = 0.0;
  try {
    image.width = std::stoi(token());
    image.height = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::exception&) {
    fail(ErrorKind::Io, "malformed PFM header");
  }
  if (scale >= 0.0) fail(ErrorKind::Io, "big-endian PFM is not supported");
  if (image.width < 0 || image.height < 0) fail(ErrorKind::Io, "negative PFM size");
  ++pos;  // single whitespace terminator
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  if (bytes.size() != pos + n * 4) fail(ErrorKind::Io, "PFM raster size mismatch");
  image.values.resize(n);
  for (int row = image.height - 1, k = 0; row >= 0; --row)
    for (int col = 0; col < image.width; ++col, ++k)
      image.values[static_cast<std::size_t>(row) * image.width + col] =
          read_raw<float>(bytes, pos + static_cast<std::size_t>(k) * 4);
  return image;
}

std::string encode_depth_pfm(const DepthImage& depth) {
  FloatImage image{depth.width(), depth.height(), {}};
  image.values.reserve(depth.values().size());
  for (double d : depth.values()) image.values.push_back(static_cast<float>(d));
  return encode_pfm(image);
}

DepthImage decode_depth_pfm(std::string_view bytes) {
  const FloatImage image = decode_pfm(bytes);
  DepthImage depth(image.width, image.height);
  for (std::size_t i = 0; i < image.values.size(); ++i) depth.values()[i] = image.values[i];
  return depth;
}

void write_depth_pfm(const std::filesystem::path& path, const DepthImage& depth) {
  write_file(path, encode_depth_pfm(depth));
}

DepthImage read_depth_pfm(const std::filesystem::path& path) {
  return decode_depth_pfm(read_file(path));
}

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (static_cast<std::uint8_t>(bytes[i]) << 16) |
                            (static_cast<std::uint8_t>(bytes[i + 1]) << 8) |
                            static_cast<std::uint8_t>(bytes[i + 2]);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = static_cast<std::uint8_t>(bytes[i]) << 16;
    if (rest == 2) v |= static_cast<std::uint8_t>(bytes[i + 1]) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  std::string out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = decode_char(c);
    if (v < 0) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      fail(ErrorKind::Io, "invalid base64 character");
    }
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((acc >> bits) & 0xFF);
    }
  }
  return out;
}

std::string encode_f64_array(std::span<const double> values) {
  std::string raw;
  raw.reserve(values.size() * 8);
  for (double v : values) append_raw(raw, v);
  return base64_encode(raw);
}

std::vector<double> decode_f64_array(std::string_view text) {
  const std::string raw = base64_decode(text);
  if (raw.size() % 8 != 0) fail(ErrorKind::Io, "f64 array payload is not a multiple of 8 bytes");
  std::vector<double> out(raw.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = read_raw<double>(raw, i * 8);
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace trussgrasp::io
