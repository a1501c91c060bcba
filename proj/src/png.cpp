#include "tdaug/io/png.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tdaug {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

void put_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& payload) {
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const auto crc =
      crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

// rows: interleaved 8-bit samples, `channels` per pixel.
void write_png(const std::string& path, int h, int w, int channels,
               const std::vector<unsigned char>& pixels) {
  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(h) * (w * channels + 1));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), pixels.begin() + static_cast<std::size_t>(y) * w * channels,
               pixels.begin() + static_cast<std::size_t>(y + 1) * w * channels);
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> zdata(zlen);
  if (compress2(zdata.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("png: deflate failed");
  zdata.resize(zlen);

  std::vector<unsigned char> file = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<unsigned char> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(w));
  put_u32(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);                                   // bit depth
  ihdr.push_back(channels == 1 ? 0 : 2);               // gray or truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk(file, "IHDR", ihdr);
  put_chunk(file, "IDAT", zdata);
  put_chunk(file, "IEND", {});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write png: " + path);
  out.write(reinterpret_cast<const char*>(file.data()),
            static_cast<std::streamsize>(file.size()));
}

unsigned char to_byte(float v, float lo, float hi) {
  const float t = (v - lo) / (hi - lo);
  const float c = t < 0.f ? 0.f : (t > 1.f ? 1.f : t);
  return static_cast<unsigned char>(std::lround(c * 255.f));
}

void draw_line(std::vector<unsigned char>& px, int h, int w, int y0, int x0, int y1, int x1,
               unsigned char r, unsigned char g, unsigned char b) {
  const int dy = std::abs(y1 - y0), dx = std::abs(x1 - x0);
  const int sy = y0 < y1 ? 1 : -1, sx = x0 < x1 ? 1 : -1;
  int err = dx - dy, y = y0, x = x0;
  for (;;) {
    if (y >= 0 && y < h && x >= 0 && x < w) {
      auto* p = &px[(static_cast<std::size_t>(y) * w + x) * 3];
      p[0] = r;
      p[1] = g;
      p[2] = b;
    }
    if (y == y1 && x == x1) break;
    const int e2 = 2 * err;
    if (e2 > -dy) {
      err -= dy;
      x += sx;
    }
    if (e2 < dx) {
      err += dx;
      y += sy;
    }
  }
}

}  // namespace

void write_png_gray(const Eigen::MatrixXf& img, const std::string& path, float lo, float hi) {
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  std::vector<unsigned char> px(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) px[static_cast<std::size_t>(y) * w + x] = to_byte(img(y, x), lo, hi);
  write_png(path, h, w, 1, px);
}

void write_png_rgb(const Eigen::MatrixXf& r, const Eigen::MatrixXf& g, const Eigen::MatrixXf& b,
                   const std::string& path) {
  const int h = static_cast<int>(r.rows()), w = static_cast<int>(r.cols());
  std::vector<unsigned char> px(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto* p = &px[(static_cast<std::size_t>(y) * w + x) * 3];
      p[0] = to_byte(r(y, x), 0.f, 1.f);
      p[1] = to_byte(g(y, x), 0.f, 1.f);
      p[2] = to_byte(b(y, x), 0.f, 1.f);
    }
  write_png(path, h, w, 3, px);
}

void write_png_labels(const LabelMat& labels, const std::string& path) {
  static const unsigned char palette[][3] = {
      {0, 0, 0},      {230, 80, 60},  {70, 160, 230}, {120, 220, 100},
      {240, 200, 60}, {180, 90, 220}, {90, 220, 210}, {240, 140, 40},
  };
  const int h = static_cast<int>(labels.rows()), w = static_cast<int>(labels.cols());
  std::vector<unsigned char> px(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto& c = palette[labels(y, x) % 8];
      auto* p = &px[(static_cast<std::size_t>(y) * w + x) * 3];
      p[0] = c[0];
      p[1] = c[1];
      p[2] = c[2];
    }
  write_png(path, h, w, 3, px);
}

void write_png_deformation(const DeformationField& field, const std::string& path,
                           int arrow_stride) {
  const int h = static_cast<int>(field.rows()), w = static_cast<int>(field.cols());
  Eigen::MatrixXf mag =
      (field.dy.array().square() + field.dx.array().square()).sqrt().matrix();
  const float hi = std::max(1e-6f, mag.maxCoeff());
  std::vector<unsigned char> px(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const unsigned char v = to_byte(mag(y, x), 0.f, hi);
      auto* p = &px[(static_cast<std::size_t>(y) * w + x) * 3];
      p[0] = v;
      p[1] = v;
      p[2] = static_cast<unsigned char>(255 - v / 2);
    }
  for (int y = arrow_stride / 2; y < h; y += arrow_stride)
    for (int x = arrow_stride / 2; x < w; x += arrow_stride) {
      const int y1 = y + static_cast<int>(std::lround(field.dy(y, x)));
      const int x1 = x + static_cast<int>(std::lround(field.dx(y, x)));
      draw_line(px, h, w, y, x, y1, x1, 255, 220, 40);
    }
  write_png(path, h, w, 3, px);
}

void write_png_intensity_field(const IntensityField& field, const std::string& path) {
  // signed map: negative blue, positive red
  const int h = static_cast<int>(field.delta.rows()), w = static_cast<int>(field.delta.cols());
  std::vector<unsigned char> px(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float v = field.delta(y, x);
      auto* p = &px[(static_cast<std::size_t>(y) * w + x) * 3];
      p[0] = to_byte(v, 0.f, 1.f);
      p[1] = to_byte(-std::abs(v), -1.f, 0.f);
      p[2] = to_byte(-v, 0.f, 1.f);
    }
  write_png(path, h, w, 3, px);
}

}  // namespace tdaug
