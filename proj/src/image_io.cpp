#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "respore/data.hpp"

namespace respore {

namespace {

// PGM P5 with maxval <= 255.
GrayImage load_pgm_stream(std::ifstream& in, const std::string& path) {
  auto next_token = [&]() -> std::string {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
      if (ch == '#') {  // comment to end of line
        while ((ch = in.get()) != EOF && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw IoError("truncated PGM header: " + path);
    return tok;
  };

  if (next_token() != "P5") throw IoError("not a binary PGM: " + path);
  int w, h, maxval;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError("malformed PGM header: " + path);
  }
  if (w < 1 || h < 1) throw IoError("bad PGM dimensions: " + path);
  if (maxval < 1 || maxval > 255) {
    throw IoError("unsupported PGM maxval " + std::to_string(maxval) + ": " +
                  path);
  }
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw IoError("truncated PGM pixel data: " + path);
  }
  GrayImage img(h, w, 0.0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    img.v[i] = raw[i] / static_cast<double>(maxval);
  }
  return img;
}

GrayImage load_png_file(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open image: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("libpng allocation failed: " + path);
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<unsigned char> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("failed to decode PNG: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (color_type != PNG_COLOR_TYPE_GRAY &&
      color_type != PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("PNG must be grayscale: " + path);
  }
  if (bit_depth == 16) png_set_strip_16(png);
  if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  pixels.resize(static_cast<std::size_t>(w) * h);
  row_ptrs.resize(h);
  for (png_uint_32 i = 0; i < h; ++i) {
    row_ptrs[i] = pixels.data() + static_cast<std::size_t>(i) * w;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  GrayImage img(static_cast<int>(h), static_cast<int>(w), 0.0);
  for (std::size_t i = 0; i < pixels.size(); ++i) img.v[i] = pixels[i] / 255.0;
  return img;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

GrayImage load_gray(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  char sig[2] = {0, 0};
  in.read(sig, 2);
  in.seekg(0);
  if (sig[0] == 'P' && sig[1] == '5') return load_pgm_stream(in, path);
  if (static_cast<unsigned char>(sig[0]) == 0x89 && sig[1] == 'P') {
    in.close();
    return load_png_file(path);
  }
  throw IoError("unrecognized image format (want binary PGM or PNG): " + path);
}

void save_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open image for writing: " + path);
  out << "P5\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> raw(img.count());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double scaled = std::clamp(img.v[i], 0.0, 1.0) * 255.0;
    raw[i] = static_cast<unsigned char>(std::llround(scaled));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing image: " + path);
}

PoreSet load_pores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pore CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty pore CSV: " + path);
  if (trim(line) != "row,col") {
    throw IoError("pore CSV must start with 'row,col' header: " + path);
  }
  PoreSet pores;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos) {
      throw IoError("missing comma at " + path + ":" + std::to_string(line_no));
    }
    try {
      Pore p;
      p.row = std::stod(t.substr(0, comma));
      p.col = std::stod(t.substr(comma + 1));
      pores.push_back(p);
    } catch (const std::exception&) {
      throw IoError("bad pore coordinates at " + path + ":" +
                    std::to_string(line_no));
    }
  }
  return pores;
}

void save_pores_csv(const PoreSet& pores, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open pore CSV for writing: " + path);
  out << "row,col\n";
  for (const auto& p : pores) {
    out << fmt_double(p.row) << "," << fmt_double(p.col) << "\n";
  }
  if (!out) throw IoError("failed writing pore CSV: " + path);
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos) {
      throw IoError("manifest line missing comma at " + path + ":" +
                    std::to_string(line_no));
    }
    auto resolve = [&](std::string p) {
      std::filesystem::path fp = trim(p);
      if (fp.is_relative()) fp = base / fp;
      return fp.string();
    };
    entries.push_back(
        {resolve(t.substr(0, comma)), resolve(t.substr(comma + 1))});
  }
  return entries;
}

void save_manifest(const std::vector<ManifestEntry>& entries,
                   const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open manifest for writing: " + path);
  for (const auto& e : entries) {
    out << e.image_path << "," << e.pores_path << "\n";
  }
  if (!out) throw IoError("failed writing manifest: " + path);
}

}  // namespace respore
