#include "tdsim/imaging.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <vector>

namespace tdsim {

GrayImage make_gray(int width, int height, int maxval) {
  if (width < 0 || height < 0 || maxval < 1 || maxval > 65535)
    throw ValidationError("image: bad dimensions or maxval");
  GrayImage img;
  img.width = width;
  img.height = height;
  img.maxval = maxval;
  img.samples.assign(static_cast<std::size_t>(width) * height, 0);
  return img;
}

BinaryImage make_binary(int width, int height) {
  if (width < 0 || height < 0) throw ValidationError("image: bad dimensions");
  BinaryImage img;
  img.width = width;
  img.height = height;
  img.bits.assign(static_cast<std::size_t>(width) * height, 0);
  return img;
}

BinaryImage threshold(const GrayImage& img, int level) {
  BinaryImage out = make_binary(img.width, img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    out.bits[i] = img.samples[i] >= level ? 1 : 0;
  return out;
}

PointSet cluster_centroids(const BinaryImage& img, int min_pixels) {
  if (min_pixels < 1) throw ValidationError("cluster_centroids: min_pixels must be >= 1");
  PointSet out;
  const int w = img.width, h = img.height;
  std::vector<char> seen(img.bits.size(), 0);
  std::vector<int> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t i0 = static_cast<std::size_t>(y0) * w + x0;
      if (!img.bits[i0] || seen[i0]) continue;
      // flood fill one 8-connected component
      stack.clear();
      stack.push_back(static_cast<int>(i0));
      seen[i0] = 1;
      double sx = 0, sy = 0;
      int count = 0;
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const int x = i % w, y = i / w;
        sx += x;
        sy += y;
        ++count;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
            if (img.bits[ni] && !seen[ni]) {
              seen[ni] = 1;
              stack.push_back(static_cast<int>(ni));
            }
          }
        }
      }
      if (count >= min_pixels) out.points.emplace_back(sx / count, sy / count);
    }
  }
  return out;
}

double projected_area(const BinaryImage& img, double pixel_scale) {
  if (!(pixel_scale > 0)) throw ValidationError("projected_area: pixel_scale must be > 0");
  std::size_t n = 0;
  for (char b : img.bits) n += b ? 1 : 0;
  return static_cast<double>(n) * pixel_scale * pixel_scale;
}

namespace {

struct PgmReader {
  std::ifstream f;
  std::string path;
  explicit PgmReader(const std::string& p) : f(p, std::ios::binary), path(p) {
    if (!f) throw Error("pgm: cannot open '" + p + "'");
  }
  [[noreturn]] void fail(const std::string& what) {
    std::ostringstream os;
    os << "pgm: " << what << " in '" << path << "' at byte " << f.tellg();
    throw ValidationError(os.str());
  }
  // Skips whitespace and '#' comments, then reads a nonnegative integer.
  int read_token() {
    int c = f.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
      if (c == '#')
        while (c != EOF && c != '\n') c = f.get();
      c = f.get();
    }
    if (c == EOF) fail("truncated header");
    if (!std::isdigit(c)) fail("expected integer");
    long v = 0;
    while (c != EOF && std::isdigit(c)) {
      v = v * 10 + (c - '0');
      if (v > 1 << 30) fail("integer overflow");
      c = f.get();
    }
    if (c != EOF) f.unget();
    return static_cast<int>(v);
  }
};

}  // namespace

GrayImage pgm_read(const std::string& path) {
  PgmReader r(path);
  char m0 = static_cast<char>(r.f.get());
  char m1 = static_cast<char>(r.f.get());
  if (m0 != 'P' || (m1 != '2' && m1 != '5')) r.fail("not a P2/P5 PGM");
  const bool binary = m1 == '5';
  const int w = r.read_token();
  const int h = r.read_token();
  const int maxval = r.read_token();
  if (w <= 0 || h <= 0 || maxval < 1 || maxval > 65535) r.fail("bad dimensions or maxval");
  GrayImage img = make_gray(w, h, maxval);
  const std::size_t n = img.samples.size();
  if (binary) {
    int c = r.f.get();  // single whitespace after maxval
    if (c == EOF) r.fail("truncated payload");
    const int bytes = maxval > 255 ? 2 : 1;
    for (std::size_t i = 0; i < n; ++i) {
      int hi = r.f.get();
      if (hi == EOF) r.fail("truncated payload");
      int v = hi;
      if (bytes == 2) {
        int lo = r.f.get();
        if (lo == EOF) r.fail("truncated payload");
        v = (hi << 8) | lo;  // most significant byte first
      }
      if (v > maxval) r.fail("sample exceeds maxval");
      img.samples[i] = static_cast<std::uint16_t>(v);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const int v = r.read_token();
      if (v > maxval) r.fail("sample exceeds maxval");
      img.samples[i] = static_cast<std::uint16_t>(v);
    }
  }
  return img;
}

void pgm_write(const GrayImage& img, const std::string& path, bool binary) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("pgm: cannot open '" + path + "' for writing");
  f << (binary ? "P5" : "P2") << "\n" << img.width << " " << img.height << "\n" << img.maxval
    << "\n";
  if (binary) {
    const int bytes = img.maxval > 255 ? 2 : 1;
    for (std::uint16_t v : img.samples) {
      if (bytes == 2) f.put(static_cast<char>(v >> 8));
      f.put(static_cast<char>(v & 0xff));
    }
  } else {
    for (std::size_t i = 0; i < img.samples.size(); ++i) {
      f << img.samples[i];
      f.put((i + 1) % static_cast<std::size_t>(img.width) == 0 ? '\n' : ' ');
    }
  }
}

}  // namespace tdsim
