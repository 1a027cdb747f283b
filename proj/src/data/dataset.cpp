#include "samlab/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "samlab/common.hpp"
#include "samlab/rng.hpp"

namespace fs = std::filesystem;

namespace samlab {

uint64_t stable_hash(const std::string& s, uint64_t seed) {
  uint64_t h = 1469598103934665603ull ^ detail::splitmix64(seed);
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return detail::splitmix64(h);
}

bool Dataset::has_lesion_masks() const {
  for (const auto& s : samples)
    if (s.lesion_mask.size() == 0) return false;
  return !samples.empty();
}

Image Dataset::normalized(const Image& img) const {
  Image out = img;
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      for (int c = 0; c < out.c; ++c)
        out.at(y, x, c) = static_cast<float>((out.at(y, x, c) - channel_mean[c]) / channel_std[c]);
  return out;
}

void Dataset::compute_stats() {
  std::array<double, 3> sum{0, 0, 0}, sumsq{0, 0, 0};
  double count = 0;
  for (const auto& s : samples) {
    for (int y = 0; y < s.image.h; ++y)
      for (int x = 0; x < s.image.w; ++x)
        for (int c = 0; c < 3; ++c) {
          const double v = s.image.at(y, x, c);
          sum[c] += v;
          sumsq[c] += v * v;
        }
    count += static_cast<double>(s.image.h) * s.image.w;
  }
  for (int c = 0; c < 3; ++c) {
    channel_mean[c] = sum[c] / count;
    const double var = sumsq[c] / count - channel_mean[c] * channel_mean[c];
    channel_std[c] = std::sqrt(std::max(var, 1e-8));
  }
}

void Dataset::split(double train_fraction, uint64_t seed) {
  check(train_fraction >= 0.0 && train_fraction <= 1.0, "split: fraction out of range");
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const uint64_t ha = stable_hash(samples[a].image_id, seed);
    const uint64_t hb = stable_hash(samples[b].image_id, seed);
    if (ha != hb) return ha < hb;
    return samples[a].image_id < samples[b].image_id;
  });
  const auto n_train = static_cast<size_t>(std::lround(train_fraction * static_cast<double>(samples.size())));
  train_indices.assign(order.begin(), order.begin() + n_train);
  val_indices.assign(order.begin() + n_train, order.end());
  std::sort(train_indices.begin(), train_indices.end());
  std::sort(val_indices.begin(), val_indices.end());
}

namespace {

// Multi-octave value noise in [0,1]; identical distribution for every class.
Image noise_background(int size, Rng& rng) {
  Image bg(size, size, 3, 0.f);
  const int grids[3] = {4, 8, 16};
  const float gains[3] = {0.5f, 0.3f, 0.2f};
  Image acc(size, size, 1, 0.f);
  for (int o = 0; o < 3; ++o) {
    Image g(grids[o], grids[o], 1);
    for (float& v : g.data) v = static_cast<float>(rng.uniform());
    const Image up = resize_bilinear(g, size, size);
    for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += gains[o] * up.data[i];
  }
  // mild channel tint so the texture is not pure gray
  const float tint[3] = {static_cast<float>(rng.uniform(0.9, 1.1)), static_cast<float>(rng.uniform(0.9, 1.1)),
                         static_cast<float>(rng.uniform(0.9, 1.1))};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c)
        bg.at(y, x, c) = std::clamp(0.3f + 0.4f * acc.at(y, x, 0) * tint[c], 0.f, 1.f);
  return bg;
}

struct ShapeFrame {
  double cx, cy, cos_t, sin_t, a, b;
  void local(double x, double y, double& u, double& v) const {
    const double dx = x - cx, dy = y - cy;
    u = cos_t * dx + sin_t * dy;
    v = -sin_t * dx + cos_t * dy;
  }
};

// Rasterizes one lesion family into a binary mask; returns covered pixels.
int rasterize_lesion(Image& mask, int family, const ShapeFrame& f, const std::vector<std::array<double, 3>>& dots) {
  const int size = mask.h;
  int covered = 0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double u, v;
      f.local(x + 0.5, y + 0.5, u, v);
      const double e = (u / f.a) * (u / f.a) + (v / f.b) * (v / f.b);
      bool in = false;
      switch (family) {
        case 0:  // ellipse
          in = e <= 1.0;
          break;
        case 1: {  // crescent: ellipse minus an offset cut
          const double uc = u - 0.75 * f.a;
          const double cut = (uc / (0.85 * f.a)) * (uc / (0.85 * f.a)) + (v / (0.85 * f.b)) * (v / (0.85 * f.b));
          in = e <= 1.0 && cut > 1.0;
          break;
        }
        case 2: {  // speckled: scattered dots
          for (const auto& d : dots) {
            const double dx = (x + 0.5) - d[0], dy = (y + 0.5) - d[1];
            if (dx * dx + dy * dy <= d[2] * d[2]) {
              in = true;
              break;
            }
          }
          break;
        }
        case 3:  // ring
          in = e <= 1.0 && e >= 0.45 * 0.45;
          break;
        case 4:  // bar
          in = std::abs(u) <= f.a && std::abs(v) <= 0.22 * f.a;
          break;
        case 5:  // cross
          in = (std::abs(u) <= f.a && std::abs(v) <= 0.18 * f.a) || (std::abs(v) <= f.a && std::abs(u) <= 0.18 * f.a);
          break;
        case 6: {  // twin blobs
          const double u1 = u - 1.6 * f.a, u2 = u + 1.6 * f.a;
          in = (u1 / f.a) * (u1 / f.a) + (v / f.b) * (v / f.b) <= 1.0 ||
               (u2 / f.a) * (u2 / f.a) + (v / f.b) * (v / f.b) <= 1.0;
          break;
        }
        case 7: {  // hollow box outline
          const double m = std::max(std::abs(u), std::abs(v));
          in = m <= f.a && m >= 0.6 * f.a;
          break;
        }
        default:
          throw Error("rasterize_lesion: unknown family");
      }
      if (in) {
        mask.at(y, x, 0) = 1.f;
        ++covered;
      }
    }
  }
  return covered;
}

float quantize8(float v) { return std::clamp(std::round(v * 255.f), 0.f, 255.f) / 255.f; }

// Densest aligned 8x8 block; lesions must be locally dense enough to show up
// at patch granularity (1.0 when the grid does not apply).
double max_block8_coverage(const Image& mask) {
  if (mask.h % 8 != 0 || mask.w % 8 != 0) return 1.0;
  double best = 0.0;
  for (int by = 0; by < mask.h; by += 8) {
    for (int bx = 0; bx < mask.w; bx += 8) {
      int on = 0;
      for (int y = by; y < by + 8; ++y)
        for (int x = bx; x < bx + 8; ++x) on += mask.at(y, x, 0) > 0.5f ? 1 : 0;
      best = std::max(best, on / 64.0);
    }
  }
  return best;
}

}  // namespace

Dataset generate_synthetic_lesion_dataset(int n_samples, int n_classes, int image_size, uint64_t seed) {
  check(n_samples >= 1, "synthetic dataset: need at least one sample");
  check(n_classes >= 1 && n_classes <= 8, "synthetic dataset: n_classes must be in [1,8]");
  check(image_size >= 16, "synthetic dataset: image_size too small");

  Dataset ds;
  ds.num_classes = n_classes;
  Rng root(seed);

  const double total_px = static_cast<double>(image_size) * image_size;
  for (int i = 0; i < n_samples; ++i) {
    Rng rng = root.fork(static_cast<uint64_t>(i));
    LesionSample s;
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%05d", i);
    s.image_id = id;
    s.label = i % n_classes;
    s.image = noise_background(image_size, rng);
    s.lesion_mask = Image(image_size, image_size, 1, 0.f);

    const int family = s.label;
    const double margin = image_size * 0.22;
    ShapeFrame f;
    f.cx = rng.uniform(margin, image_size - margin);
    f.cy = rng.uniform(margin, image_size - margin);
    const double theta = rng.uniform(0.0, M_PI);
    f.cos_t = std::cos(theta);
    f.sin_t = std::sin(theta);

    const double target_cov = rng.uniform(0.06, 0.12);
    double base = std::sqrt(target_cov * total_px / M_PI);
    const double aspect = rng.uniform(0.65, 1.0);

    int covered = 0;
    for (int attempt = 0; attempt < 14; ++attempt) {
      std::fill(s.lesion_mask.data.begin(), s.lesion_mask.data.end(), 0.f);
      f.a = std::max(4.0, base / std::sqrt(aspect));
      f.b = std::max(3.0, base * std::sqrt(aspect));

      std::vector<std::array<double, 3>> dots;
      if (family == 2) {
        Rng drng = rng.fork(attempt);
        const int k = 5 + drng.uniform_int(3);
        const double rd = std::max(3.4, base / 2.6);
        for (int dtry = 0; dtry < 200 && static_cast<int>(dots.size()) < k; ++dtry) {
          const double ang = drng.uniform(0.0, 2 * M_PI);
          const double rad = std::sqrt(drng.uniform());
          const double du = rad * 1.7 * f.a * std::cos(ang);
          const double dv = rad * 1.7 * f.b * std::sin(ang);
          const double px = f.cx + f.cos_t * du - f.sin_t * dv;
          const double py = f.cy + f.sin_t * du + f.cos_t * dv;
          if (px < rd + 1 || py < rd + 1 || px > image_size - rd - 2 || py > image_size - rd - 2) continue;
          bool ok = true;
          for (const auto& d : dots) {
            const double dx = px - d[0], dy = py - d[1];
            if (dx * dx + dy * dy < (2 * rd + 2) * (2 * rd + 2)) ok = false;
          }
          if (ok) dots.push_back({px, py, rd});
        }
      }

      covered = rasterize_lesion(s.lesion_mask, family, f, dots);
      const double cov = covered / total_px;
      if (cov >= 0.012 && cov <= 0.14 && max_block8_coverage(s.lesion_mask) >= 0.31) break;
      if (cov < 0.012)
        base *= 1.3;
      else if (cov > 0.14)
        base *= 0.78;
      else
        base *= 1.15;  // dense enough overall but too thin at patch granularity
    }
    check(covered / total_px >= 0.01 && covered / total_px <= 0.15,
          "synthetic dataset: lesion coverage outside [1%,15%] for " + s.image_id);

    // lesion appearance; the tint distribution is shared by all classes
    const bool dark = rng.uniform() < 0.5;
    float tint[3];
    for (int c = 0; c < 3; ++c)
      tint[c] = static_cast<float>(dark ? rng.uniform(0.05, 0.25) : rng.uniform(0.75, 0.95));
    for (int y = 0; y < image_size; ++y)
      for (int x = 0; x < image_size; ++x) {
        if (s.lesion_mask.at(y, x, 0) > 0.5f) {
          const float speckle = static_cast<float>(rng.uniform(-0.10, 0.10));
          for (int c = 0; c < 3; ++c) {
            const float noise = speckle + static_cast<float>(rng.uniform(-0.03, 0.03));
            s.image.at(y, x, c) = std::clamp(0.35f * s.image.at(y, x, c) + 0.65f * tint[c] + noise, 0.f, 1.f);
          }
        }
      }
    // quantize to the 8-bit grid so PNG persistence round-trips exactly
    for (float& v : s.image.data) v = quantize8(v);

    ds.samples.push_back(std::move(s));
  }

  ds.compute_stats();
  ds.split(0.8, seed);
  return ds;
}

Dataset load_image_folder(const std::string& path, double train_fraction, uint64_t split_seed) {
  check(fs::is_directory(path), "load_image_folder: not a directory: " + path);
  Dataset ds;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(path))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  check(!class_dirs.empty(), "load_image_folder: no class directories under " + path);

  ds.num_classes = static_cast<int>(class_dirs.size());
  for (size_t label = 0; label < class_dirs.size(); ++label) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[label]))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    check(!files.empty(), "load_image_folder: empty class directory: " + class_dirs[label].string());
    for (const auto& file : files) {
      LesionSample s;
      s.image = read_png(file.string());
      s.label = static_cast<int>(label);
      s.image_id = fs::relative(file, path).generic_string();
      ds.samples.push_back(std::move(s));
    }
  }
  ds.compute_stats();
  ds.split(train_fraction, split_seed);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& s : ds.samples) {
    write_png_rgb8((fs::path(dir) / "images" / (s.image_id + ".png")).string(), s.image);
    int bx0 = s.image.w, by0 = s.image.h, bx1 = -1, by1 = -1;
    if (s.lesion_mask.size() > 0) {
      Image m3(s.lesion_mask.h, s.lesion_mask.w, 3);
      for (int y = 0; y < m3.h; ++y)
        for (int x = 0; x < m3.w; ++x) {
          const float v = s.lesion_mask.at(y, x, 0) > 0.5f ? 1.f : 0.f;
          if (v > 0.5f) {
            bx0 = std::min(bx0, x);
            by0 = std::min(by0, y);
            bx1 = std::max(bx1, x);
            by1 = std::max(by1, y);
          }
          for (int c = 0; c < 3; ++c) m3.at(y, x, c) = v;
        }
      write_png_rgb8((fs::path(dir) / "masks" / (s.image_id + ".png")).string(), m3);
    }
    manifest.push_back({{"image_id", s.image_id},
                        {"label", s.label},
                        {"lesion_bbox", {bx0, by0, std::max(0, bx1 - bx0 + 1), std::max(0, by1 - by0 + 1)}}});
  }
  nlohmann::json root = {{"num_classes", ds.num_classes}, {"samples", manifest}};
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << root.dump(2) << "\n";
  check(out.good(), "save_dataset: failed to write manifest");
}

Dataset load_synthetic_dataset(const std::string& dir, double train_fraction, uint64_t split_seed) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  check(in.good(), "load_synthetic_dataset: missing manifest.json in " + dir);
  nlohmann::json root = nlohmann::json::parse(in);

  Dataset ds;
  ds.num_classes = root.at("num_classes").get<int>();
  for (const auto& entry : root.at("samples")) {
    LesionSample s;
    s.image_id = entry.at("image_id").get<std::string>();
    s.label = entry.at("label").get<int>();
    s.image = read_png((fs::path(dir) / "images" / (s.image_id + ".png")).string());
    const auto mask_path = fs::path(dir) / "masks" / (s.image_id + ".png");
    if (fs::exists(mask_path)) {
      const Image m3 = read_png(mask_path.string());
      s.lesion_mask = Image(m3.h, m3.w, 1);
      for (int y = 0; y < m3.h; ++y)
        for (int x = 0; x < m3.w; ++x) s.lesion_mask.at(y, x, 0) = m3.at(y, x, 0) > 0.5f ? 1.f : 0.f;
    }
    ds.samples.push_back(std::move(s));
  }
  ds.compute_stats();
  ds.split(train_fraction, split_seed);
  return ds;
}

}  // namespace samlab
