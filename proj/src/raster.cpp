#include "alpr/raster.hpp"

#include "alpr/error.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first.
#include <cstdio>
#include <jpeglib.h>

#include <csetjmp>
#include <cstring>
#include <fstream>
#include <memory>

namespace alpr {

RasterImage RasterImage::filled(int width, int height, std::uint8_t r, std::uint8_t g,
                                std::uint8_t b) {
  RasterImage img;
  img.planes[0].setConstant(height, width, r);
  img.planes[1].setConstant(height, width, g);
  img.planes[2].setConstant(height, width, b);
  return img;
}

namespace {

enum class Format { png, jpeg, unknown };

Format sniff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image '" + path.string() + "'");
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), sizeof sig);
  if (in.gcount() >= 8 && png_sig_cmp(sig, 0, 8) == 0) return Format::png;
  if (in.gcount() >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return Format::jpeg;
  return Format::unknown;
}

RasterImage from_interleaved(const std::vector<std::uint8_t>& rgb, int width, int height) {
  RasterImage img;
  for (auto& p : img.planes) p.resize(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        img.planes[c](y, x) = rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  return img;
}

RasterImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw DataError("PNG decode failed for '" + path.string() + "': " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError("PNG decode failed for '" + path.string() + "': " + image.message);
  }
  return from_interleaved(buffer, static_cast<int>(image.width), static_cast<int>(image.height));
}

struct JpegError {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

RasterImage read_jpeg(const std::filesystem::path& path, bool header_only, int* width_out,
                      int* height_out) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw DataError("cannot open image '" + path.string() + "'");

  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = on_jpeg_error;
  std::vector<std::uint8_t> buffer;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DataError("JPEG decode failed for '" + path.string() + "': " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  const int width = static_cast<int>(cinfo.image_width);
  const int height = static_cast<int>(cinfo.image_height);
  if (width_out) *width_out = width;
  if (height_out) *height_out = height;
  if (header_only) {
    jpeg_destroy_decompress(&cinfo);
    return {};
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  buffer.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = buffer.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_interleaved(buffer, width, height);
}

}  // namespace

RasterImage read_image(const std::filesystem::path& path) {
  switch (sniff(path)) {
    case Format::png:
      return read_png(path);
    case Format::jpeg:
      return read_jpeg(path, false, nullptr, nullptr);
    default:
      throw DataError("'" + path.string() + "' is neither PNG nor JPEG");
  }
}

std::array<int, 2> image_size(const std::filesystem::path& path) {
  switch (sniff(path)) {
    case Format::png: {
      png_image image;
      std::memset(&image, 0, sizeof image);
      image.version = PNG_IMAGE_VERSION;
      if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw DataError("PNG header read failed for '" + path.string() + "'");
      const std::array<int, 2> size{static_cast<int>(image.width), static_cast<int>(image.height)};
      png_image_free(&image);
      return size;
    }
    case Format::jpeg: {
      int w = 0;
      int h = 0;
      read_jpeg(path, true, &w, &h);
      return {w, h};
    }
    default:
      throw DataError("'" + path.string() + "' is neither PNG nor JPEG");
  }
}

void write_png(const RasterImage& img, const std::filesystem::path& path) {
  const int w = img.width();
  const int h = img.height();
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] = img.planes[c](y, x);

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr))
    throw DataError("PNG encode failed for '" + path.string() + "': " + image.message);
}

}  // namespace alpr
