#pragma once

// PNG and 16-bit PGM reading/writing. Frames are 8-bit RGB PNG, planes and
// masks 8-bit grayscale PNG (mask 1 -> 255).

#include "gridtac/errors.hpp"
#include "gridtac/frames.hpp"

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace gridtac::io {

namespace detail {

inline std::vector<std::uint8_t> read_png(const std::filesystem::path& path, std::uint32_t format,
                                          int& width, int& height)
{
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  width = static_cast<int>(img.width);
  height = static_cast<int>(img.height);
  return buf;
}

inline void write_png(const std::filesystem::path& path, std::uint32_t format, int width, int height,
                      const std::uint8_t* data)
{
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

} // namespace detail

inline Frame load_frame(const std::filesystem::path& path)
{
  int w = 0, h = 0;
  auto buf = detail::read_png(path, PNG_FORMAT_RGB, w, h);
  return {w, h, std::move(buf)};
}

inline void save_frame(const std::filesystem::path& path, const Frame& f)
{
  detail::write_png(path, PNG_FORMAT_RGB, f.width(), f.height(), f.data().data());
}

inline ChannelPlane load_plane(const std::filesystem::path& path, ChannelTag tag = ChannelTag::gray)
{
  int w = 0, h = 0;
  auto buf = detail::read_png(path, PNG_FORMAT_GRAY, w, h);
  return {w, h, tag, std::move(buf)};
}

inline void save_plane(const std::filesystem::path& path, const ChannelPlane& p)
{
  detail::write_png(path, PNG_FORMAT_GRAY, p.width(), p.height(), p.data().data());
}

inline void save_mask(const std::filesystem::path& path, const BinaryMask& m)
{
  save_plane(path, m.to_plane());
}

inline BinaryMask load_mask(const std::filesystem::path& path)
{
  return BinaryMask::from_plane(load_plane(path));
}

/// Binary PGM (P5) with maxval 65535, big-endian samples.
inline void save_pgm16(const std::filesystem::path& path, const Plane<std::uint16_t>& p)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << "P5\n" << p.width() << ' ' << p.height() << "\n65535\n";
  std::vector<char> bytes(p.size() * 2);
  auto src = p.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    bytes[2 * i] = static_cast<char>(src[i] >> 8);
    bytes[2 * i + 1] = static_cast<char>(src[i] & 0xFF);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

inline Plane<std::uint16_t> load_pgm16(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 65535) {
    throw IoError("unsupported PGM header in " + path.string());
  }
  in.get();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 2);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError("truncated PGM " + path.string());
  }
  std::vector<std::uint16_t> vals(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    vals[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
  }
  return {w, h, std::move(vals)};
}

} // namespace gridtac::io
