#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "evkit/error.hpp"
#include "evkit/util/netpbm.hpp"
#include "evkit/util/parallel.hpp"

namespace evkit {

int default_thread_count() {
  if (const char* env = std::getenv("EVKIT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_pgm(const std::filesystem::path& path, const ImageD& img, double lo, double hi) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  for (double v : img.pixels()) {
    const double q = std::clamp((v - lo) * scale, 0.0, 255.0);
    out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(q))));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  throw FormatError("truncated PGM header");
}

}  // namespace

ImageD read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P2") throw FormatError(path.string() + ": not a PGM file");
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw FormatError(path.string() + ": unsupported PGM geometry");
  }
  ImageD img(w, h);
  if (magic == "P5") {
    in.get();
    for (double& v : img.pixels()) {
      const int c = in.get();
      if (c == EOF) throw FormatError(path.string() + ": truncated PGM data");
      v = static_cast<double>(c) / maxval;
    }
  } else {
    for (double& v : img.pixels()) v = std::stod(next_token(in)) / maxval;
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image<Rgb>& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (const Rgb& px : img.pixels()) {
    out.write(reinterpret_cast<const char*>(px.data()), 3);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace evkit
