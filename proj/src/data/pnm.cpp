#include "ascore/data/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <string>

#include "ascore/error.hpp"

namespace ascore::data {

namespace {

struct Header {
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned maxval = 0;
};

// Reads the next header token, skipping whitespace and comments.
std::string next_token(std::istream& in) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  while (c != EOF && !std::isspace(c) && c != '#') {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  // Exactly one whitespace byte separates maxval from the raster.
  if (c == '#') in.unget();
  return token;
}

std::size_t parse_positive(const std::string& token, const std::filesystem::path& path,
                           const char* what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(token, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (token.empty() || pos != token.size() || v == 0)
    throw IoError(path.string() + ": invalid " + what + " '" + token + "'");
  return static_cast<std::size_t>(v);
}

Header read_header(std::istream& in, const std::filesystem::path& path, const char* magic) {
  const std::string m = next_token(in);
  if (m != magic) throw IoError(path.string() + ": expected magic " + magic + ", got '" + m + "'");
  Header h;
  h.width = parse_positive(next_token(in), path, "width");
  h.height = parse_positive(next_token(in), path, "height");
  const std::size_t maxval = parse_positive(next_token(in), path, "maxval");
  if (maxval > 65535) throw IoError(path.string() + ": maxval above 65535");
  h.maxval = static_cast<unsigned>(maxval);
  return h;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void read_raster(std::istream& in, std::vector<unsigned char>& bytes,
                 const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size())
    throw IoError(path.string() + ": truncated raster");
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path, "P6");
  if (h.maxval != 255) throw IoError(path.string() + ": only 8-bit PPM is supported");
  RgbImage img{h.width, h.height, std::vector<std::uint8_t>(h.width * h.height * 3)};
  std::vector<unsigned char> bytes(img.pixels.size());
  read_raster(in, bytes, path);
  std::copy(bytes.begin(), bytes.end(), img.pixels.begin());
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  if (image.width == 0 || image.height == 0 ||
      image.pixels.size() != image.width * image.height * 3)
    throw ShapeError("write_ppm: pixel buffer does not match " + std::to_string(image.width) +
                     "x" + std::to_string(image.height));
  auto out = open_out(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path, "P5");
  GrayImage img;
  img.width = h.width;
  img.height = h.height;
  img.maxval = static_cast<std::uint16_t>(h.maxval);
  const std::size_t n = h.width * h.height;
  const std::size_t bytes_per = h.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> bytes(n * bytes_per);
  read_raster(in, bytes, path);
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bytes_per == 2 ? (unsigned{bytes[2 * i]} << 8) | bytes[2 * i + 1]
                                      : unsigned{bytes[i]};
    if (v > h.maxval) throw IoError(path.string() + ": sample exceeds maxval");
    img.pixels[i] = static_cast<std::uint16_t>(v);
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  if (image.width == 0 || image.height == 0 || image.pixels.size() != image.width * image.height)
    throw ShapeError("write_pgm: pixel buffer does not match " + std::to_string(image.width) +
                     "x" + std::to_string(image.height));
  if (image.maxval == 0) throw ShapeError("write_pgm: maxval must be positive");
  std::vector<unsigned char> bytes;
  const bool wide = image.maxval > 255;
  bytes.reserve(image.pixels.size() * (wide ? 2 : 1));
  for (std::uint16_t v : image.pixels) {
    if (v > image.maxval) throw ShapeError("write_pgm: sample exceeds maxval");
    if (wide) bytes.push_back(static_cast<unsigned char>(v >> 8));
    bytes.push_back(static_cast<unsigned char>(v & 0xff));
  }
  auto out = open_out(path);
  out << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace ascore::data
