#include "tripletnet/imageio.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <vector>

#ifdef TRIPLETNET_WITH_PNG
#include <png.h>
#endif

namespace tripletnet {

namespace {

float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

uint8_t to_byte(float v) { return uint8_t(clamp01(v) * 255.0f + 0.5f); }

// ---- PNM ----

int pnm_next_int(std::istream& is, const std::string& path) {
  // skips whitespace and '#' comments
  for (;;) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  int v = 0;
  if (!(is >> v)) throw DataError("malformed PNM header: " + path);
  return v;
}

Tensor<float> read_pnm(std::ifstream& is, const std::string& path) {
  char p = 0, kind = 0;
  is.get(p);
  is.get(kind);
  if (p != 'P' || (kind != '2' && kind != '3' && kind != '5' && kind != '6'))
    throw DataError("unsupported PNM type: " + path);
  const bool color = kind == '3' || kind == '6';
  const bool binary = kind == '5' || kind == '6';
  const int w = pnm_next_int(is, path);
  const int h = pnm_next_int(is, path);
  const int maxval = pnm_next_int(is, path);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
    throw DataError("unsupported PNM geometry: " + path);
  const int c = color ? 3 : 1;
  Tensor<float> img({c, h, w});
  const float inv = 1.0f / float(maxval);
  if (binary) {
    is.get();  // single whitespace after header
    std::vector<uint8_t> row(size_t(w) * c);
    for (int y = 0; y < h; ++y) {
      is.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
      if (!is) throw DataError("truncated PNM payload: " + path);
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < c; ++ch)
          img.data()[(int64_t(ch) * h + y) * w + x] = float(row[size_t(x) * c + ch]) * inv;
    }
  } else {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < c; ++ch)
          img.data()[(int64_t(ch) * h + y) * w + x] = float(pnm_next_int(is, path)) * inv;
  }
  return img;
}

#ifdef TRIPLETNET_WITH_PNG

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

Tensor<float> read_png_file(const std::string& path) {
  PngReadCloser raii;
  raii.fp = std::fopen(path.c_str(), "rb");
  if (!raii.fp) throw DataError("cannot open image: " + path);
  raii.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  raii.info = png_create_info_struct(raii.png);
  if (!raii.png || !raii.info) throw DataError("png init failed: " + path);
  if (setjmp(png_jmpbuf(raii.png))) throw DataError("png decode failed: " + path);

  png_init_io(raii.png, raii.fp);
  png_read_info(raii.png, raii.info);

  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(raii.png, raii.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(raii.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(raii.png);
  if (png_get_valid(raii.png, raii.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(raii.png);
  if (bit_depth == 16) png_set_strip_16(raii.png);
  png_set_strip_alpha(raii.png);
  png_read_update_info(raii.png, raii.info);

  const int channels = png_get_channels(raii.png, raii.info);
  if (channels != 1 && channels != 3) throw DataError("unsupported png channel count: " + path);

  std::vector<uint8_t> pixels(size_t(w) * h * size_t(channels));
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + size_t(y) * w * size_t(channels);
  png_read_image(raii.png, rows.data());

  Tensor<float> img({channels, int(h), int(w)});
  constexpr float inv = 1.0f / 255.0f;
  for (int ch = 0; ch < channels; ++ch)
    for (png_uint_32 y = 0; y < h; ++y)
      for (png_uint_32 x = 0; x < w; ++x)
        img.data()[(int64_t(ch) * h + y) * w + x] =
            float(pixels[(size_t(y) * w + x) * size_t(channels) + size_t(ch)]) * inv;
  return img;
}

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

#endif  // TRIPLETNET_WITH_PNG

}  // namespace

Tensor<float> read_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open image: " + path);
  char magic[2] = {0, 0};
  is.read(magic, 2);
  if (!is) throw DataError("cannot read image header: " + path);
  is.seekg(0);
  if (magic[0] == 'P' && magic[1] >= '2' && magic[1] <= '6') return read_pnm(is, path);
  if (uint8_t(magic[0]) == 0x89 && magic[1] == 'P') {
    is.close();
#ifdef TRIPLETNET_WITH_PNG
    return read_png_file(path);
#else
    throw DataError("png support not built: " + path);
#endif
  }
  throw DataError("unrecognized image format: " + path);
}

void write_pgm(const std::string& path, const Tensor<float>& image) {
  if (image.ndim() != 3 || image.dim(0) != 1) throw ShapeError("write_pgm: image must be [1,H,W]");
  const int h = image.dim(1), w = image.dim(2);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "P5\n" << w << " " << h << "\n255\n";
  for (int64_t i = 0; i < int64_t(h) * w; ++i) os.put(char(to_byte(image.data()[i])));
  if (!os) throw DataError("write failed: " + path);
}

void write_ppm(const std::string& path, const Tensor<float>& image) {
  if (image.ndim() != 3 || image.dim(0) != 3) throw ShapeError("write_ppm: image must be [3,H,W]");
  const int h = image.dim(1), w = image.dim(2);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "P6\n" << w << " " << h << "\n255\n";
  const int64_t plane = int64_t(h) * w;
  for (int64_t i = 0; i < plane; ++i)
    for (int ch = 0; ch < 3; ++ch) os.put(char(to_byte(image.data()[ch * plane + i])));
  if (!os) throw DataError("write failed: " + path);
}

void write_png(const std::string& path, const Tensor<float>& image) {
#ifdef TRIPLETNET_WITH_PNG
  if (image.ndim() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
    throw ShapeError("write_png: image must be [1|3,H,W]");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  PngWriteCloser raii;
  raii.fp = std::fopen(path.c_str(), "wb");
  if (!raii.fp) throw DataError("cannot open for writing: " + path);
  raii.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  raii.info = png_create_info_struct(raii.png);
  if (!raii.png || !raii.info) throw DataError("png init failed: " + path);
  if (setjmp(png_jmpbuf(raii.png))) throw DataError("png encode failed: " + path);

  png_init_io(raii.png, raii.fp);
  png_set_IHDR(raii.png, raii.info, png_uint_32(w), png_uint_32(h), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(raii.png, raii.info);

  const int64_t plane = int64_t(h) * w;
  std::vector<uint8_t> row(size_t(w) * size_t(c));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        row[size_t(x) * size_t(c) + size_t(ch)] =
            to_byte(image.data()[ch * plane + int64_t(y) * w + x]);
    png_write_row(raii.png, row.data());
  }
  png_write_end(raii.png, nullptr);
#else
  (void)path;
  (void)image;
  throw DataError("png support not built");
#endif
}

bool png_supported() {
#ifdef TRIPLETNET_WITH_PNG
  return true;
#else
  return false;
#endif
}

}  // namespace tripletnet
