#include "hazegan/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "hazegan/errors.hpp"
#include "hazegan/haze_model.hpp"
#include "hazegan/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hazegan {

namespace {

bool has_image_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ".png" || e == ".jpg" || e == ".jpeg";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_ext(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void note(std::vector<std::string>* diagnostics, const std::string& msg) {
  if (diagnostics) diagnostics->push_back(msg);
}

// Validates that a candidate pair decodes and has matching dimensions.
bool validate_pair(ImagePair& pair, std::vector<std::string>* diagnostics) {
  Image hazy;
  try {
    hazy = read_image(pair.hazy_path, diagnostics);
  } catch (const DataError& e) {
    note(diagnostics, std::string("skipped: ") + e.what());
    return false;
  }
  if (pair.has_clear()) {
    Image clear;
    try {
      clear = read_image(pair.clear_path, diagnostics);
    } catch (const DataError& e) {
      note(diagnostics, std::string("skipped: ") + e.what());
      return false;
    }
    if (!hazy.same_shape(clear)) {
      note(diagnostics, "rejected " + pair.id + ": hazy " + std::to_string(hazy.w) + "x" +
                            std::to_string(hazy.h) + " vs clear " + std::to_string(clear.w) +
                            "x" + std::to_string(clear.h));
      return false;
    }
  }
  return true;
}

}  // namespace

DatasetManifest load_manifest(const std::string& root, DirLayout layout,
                              std::vector<std::string>* diagnostics) {
  if (!fs::is_directory(root)) throw DataError("dataset root does not exist: " + root);
  if (layout == DirLayout::kAuto) {
    layout = fs::is_directory(fs::path(root) / "hazy") ? DirLayout::kSubdirs : DirLayout::kSuffix;
  }

  // Collect (id, hazy, clear-or-empty) candidates.
  std::vector<ImagePair> candidates;
  if (layout == DirLayout::kSubdirs) {
    std::map<std::string, fs::path> clears;
    for (const auto& p : list_images(fs::path(root) / "clear")) clears[p.stem().string()] = p;
    for (const auto& p : list_images(fs::path(root) / "hazy")) {
      ImagePair pair;
      pair.id = p.stem().string();
      pair.hazy_path = p.string();
      auto it = clears.find(pair.id);
      if (it != clears.end()) pair.clear_path = it->second.string();
      candidates.push_back(std::move(pair));
    }
  } else {
    std::map<std::string, fs::path> clears;
    std::vector<fs::path> hazies;
    for (const auto& p : list_images(root)) {
      const std::string stem = p.stem().string();
      if (stem.ends_with("_hazy")) {
        hazies.push_back(p);
      } else if (stem.ends_with("_gt")) {
        clears[stem.substr(0, stem.size() - 3)] = p;
      }
    }
    for (const auto& p : hazies) {
      const std::string stem = p.stem().string();
      ImagePair pair;
      pair.id = stem.substr(0, stem.size() - 5);
      pair.hazy_path = p.string();
      auto it = clears.find(pair.id);
      if (it != clears.end()) pair.clear_path = it->second.string();
      candidates.push_back(std::move(pair));
    }
  }
  if (candidates.empty()) throw DataError("empty dataset: no hazy images under " + root);

  const bool any_clear =
      std::any_of(candidates.begin(), candidates.end(), [](const auto& p) { return p.has_clear(); });

  DatasetManifest manifest;
  manifest.source_name = fs::path(root).filename().string();
  manifest.has_references = any_clear;
  for (ImagePair& pair : candidates) {
    if (any_clear && !pair.has_clear()) {
      note(diagnostics, "unpaired hazy image skipped: " + pair.hazy_path);
      continue;
    }
    if (validate_pair(pair, diagnostics)) manifest.pairs.push_back(std::move(pair));
  }
  if (manifest.pairs.empty()) throw DataError("empty dataset: no valid pairs under " + root);
  std::sort(manifest.pairs.begin(), manifest.pairs.end(),
            [](const ImagePair& a, const ImagePair& b) { return a.id < b.id; });
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& json_path) {
  const fs::path base = fs::absolute(fs::path(json_path)).parent_path();
  json j;
  j["source_name"] = manifest.source_name;
  j["has_references"] = manifest.has_references;
  json pairs = json::array();
  for (const ImagePair& pair : manifest.pairs) {
    json p;
    p["id"] = pair.id;
    p["hazy"] = fs::relative(fs::absolute(pair.hazy_path), base).generic_string();
    if (pair.has_clear()) {
      p["clear"] = fs::relative(fs::absolute(pair.clear_path), base).generic_string();
    }
    pairs.push_back(std::move(p));
  }
  j["pairs"] = std::move(pairs);
  std::ofstream out(json_path);
  if (!out) throw DataError("cannot write manifest: " + json_path);
  out << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw DataError("cannot read manifest: " + json_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + json_path + ": " + e.what());
  }
  const fs::path base = fs::absolute(fs::path(json_path)).parent_path();
  DatasetManifest manifest;
  manifest.source_name = j.value("source_name", "");
  manifest.has_references = j.value("has_references", true);
  for (const auto& p : j.at("pairs")) {
    ImagePair pair;
    pair.id = p.at("id").get<std::string>();
    pair.hazy_path = (base / p.at("hazy").get<std::string>()).lexically_normal().string();
    if (p.contains("clear")) {
      pair.clear_path = (base / p.at("clear").get<std::string>()).lexically_normal().string();
    }
    manifest.pairs.push_back(std::move(pair));
  }
  std::sort(manifest.pairs.begin(), manifest.pairs.end(),
            [](const ImagePair& a, const ImagePair& b) { return a.id < b.id; });
  return manifest;
}

SplitResult split(const DatasetManifest& manifest, double test_ratio, uint64_t seed) {
  if (!(test_ratio > 0.0) || !(test_ratio < 1.0)) {
    throw InvalidParameterError("test_ratio must lie in (0,1)");
  }
  if (manifest.pairs.empty()) throw InvalidParameterError("cannot split an empty manifest");

  std::vector<size_t> order(manifest.pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng::derive(seed, "split");
  rng.shuffle(order);

  const size_t n_test = size_t(std::llround(test_ratio * double(manifest.pairs.size())));
  SplitResult result;
  result.seed = seed;
  result.ratio = test_ratio;
  result.train.source_name = manifest.source_name + "/train";
  result.test.source_name = manifest.source_name + "/test";
  result.train.has_references = manifest.has_references;
  result.test.has_references = manifest.has_references;
  for (size_t i = 0; i < order.size(); ++i) {
    (i < n_test ? result.test : result.train).pairs.push_back(manifest.pairs[order[i]]);
  }
  auto by_id = [](const ImagePair& a, const ImagePair& b) { return a.id < b.id; };
  std::sort(result.train.pairs.begin(), result.train.pairs.end(), by_id);
  std::sort(result.test.pairs.begin(), result.test.pairs.end(), by_id);
  return result;
}

Tensor image_to_net_tensor(const Image& img, int size) {
  const Image resized = resize_bilinear(img, size, size);
  Tensor t(Shape(1, 3, size, size));
  float* d = t.data();
  const int64_t plane = int64_t(size) * size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        float v = 2.f * resized.at(y, x, c) - 1.f;
        d[c * plane + y * size + x] = v < -1.f ? -1.f : v > 1.f ? 1.f : v;
      }
    }
  }
  return t;
}

Tensor to_net_tensor(const std::string& path, int size, std::vector<std::string>* diagnostics) {
  return image_to_net_tensor(read_image(path, diagnostics), size);
}

Image from_net_tensor(const Tensor& t) {
  const Shape s = t.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("from_net_tensor expects a (1,3,H,W) tensor");
  Image img(s.h, s.w);
  const float* d = t.data();
  const int64_t plane = int64_t(s.h) * s.w;
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = 0.5f * (d[c * plane + y * s.w + x] + 1.f);
        img.at(y, x, c) = v < 0.f ? 0.f : v > 1.f ? 1.f : v;
      }
    }
  }
  return img;
}

namespace {

// Value noise: a coarse uniform grid upsampled bilinearly. Two octaves give
// fields that are smooth but not flat.
FloatMap smooth_field(Rng& rng, int h, int w, float lo, float hi) {
  auto octave = [&](int grid) {
    std::vector<float> g(size_t(grid) * grid);
    for (float& v : g) v = float(rng.uniform());
    FloatMap f(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float gy = float(y) / float(h - 1 > 0 ? h - 1 : 1) * (grid - 1);
        const float gx = float(x) / float(w - 1 > 0 ? w - 1 : 1) * (grid - 1);
        const int y0 = std::min(int(gy), grid - 2);
        const int x0 = std::min(int(gx), grid - 2);
        const float fy = gy - float(y0);
        const float fx = gx - float(x0);
        const float v00 = g[size_t(y0) * grid + x0];
        const float v01 = g[size_t(y0) * grid + x0 + 1];
        const float v10 = g[size_t(y0 + 1) * grid + x0];
        const float v11 = g[size_t(y0 + 1) * grid + x0 + 1];
        f.at(y, x) = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
      }
    }
    return f;
  };
  FloatMap base = octave(4);
  FloatMap detail = octave(9);
  FloatMap out(h, w);
  for (size_t i = 0; i < out.v.size(); ++i) {
    out.v[i] = lo + (hi - lo) * (0.7f * base.v[i] + 0.3f * detail.v[i]);
  }
  return out;
}

}  // namespace

DatasetManifest generate_synthetic_dataset(const std::string& out_dir,
                                           const SyntheticConfig& config) {
  if (config.n < 1) throw InvalidParameterError("synthetic dataset needs n >= 1");
  if (config.image_size < 8) throw InvalidParameterError("image_size must be >= 8");
  if (config.k_min < 0 || config.k_max < config.k_min) {
    throw InvalidParameterError("invalid k range");
  }
  if (config.airlight_min < 0 || config.airlight_max > 1 ||
      config.airlight_max < config.airlight_min) {
    throw InvalidParameterError("airlight range must lie within [0,1]");
  }
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "hazy", ec);
  fs::create_directories(fs::path(out_dir) / "clear", ec);
  if (!fs::is_directory(fs::path(out_dir) / "hazy")) {
    throw DataError("cannot create output directory: " + out_dir);
  }

  const int size = config.image_size;
  DatasetManifest manifest;
  manifest.source_name = "synthetic";
  manifest.has_references = true;
  json params_log = json::object();

  for (int i = 0; i < config.n; ++i) {
    Rng rng = Rng::derive(config.seed, "scene", uint64_t(i));

    // Clear scene: smooth albedo shaped by a shading field, plus a few
    // geometric shapes at their own depths so depth edges align with color
    // edges.
    Image clear(size, size);
    FloatMap shading = smooth_field(rng, size, size, 0.3f, 1.0f);
    FloatMap fields[3];
    for (auto& f : fields) f = smooth_field(rng, size, size, 0.05f, 0.95f);
    FloatMap depth = smooth_field(rng, size, size, 0.5f, 1.5f);

    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        for (int c = 0; c < 3; ++c) clear.at(y, x, c) = fields[c].at(y, x) * shading.at(y, x);
      }
    }

    const int n_shapes = 2 + rng.below(4);
    for (int sidx = 0; sidx < n_shapes; ++sidx) {
      const bool circle = rng.uniform() < 0.5;
      const int cx = rng.below(size);
      const int cy = rng.below(size);
      const int radius = 2 + rng.below(std::max(2, size / 4));
      float color[3];
      const bool dark = rng.uniform() < 0.5;
      for (float& c : color) c = float(rng.uniform()) * (dark ? 0.35f : 1.0f);
      const float shape_depth = float(rng.uniform(0.2, 0.9));
      for (int y = std::max(0, cy - radius); y < std::min(size, cy + radius + 1); ++y) {
        for (int x = std::max(0, cx - radius); x < std::min(size, cx + radius + 1); ++x) {
          if (circle) {
            const int dy = y - cy, dx = x - cx;
            if (dy * dy + dx * dx > radius * radius) continue;
          }
          for (int c = 0; c < 3; ++c) clear.at(y, x, c) = color[c];
          depth.at(y, x) = shape_depth;
        }
      }
    }

    HazeParams params;
    params.k = rng.uniform(config.k_min, config.k_max);
    const float a = float(rng.uniform(config.airlight_min, config.airlight_max));
    params.airlight = {a, a, a};

    const Image hazy = synthesize_haze(clear, depth, params);

    char id[32];
    std::snprintf(id, sizeof(id), "img_%04d", i);
    const std::string clear_path = (fs::path(out_dir) / "clear" / (std::string(id) + ".png")).string();
    const std::string hazy_path = (fs::path(out_dir) / "hazy" / (std::string(id) + ".png")).string();
    write_image(clear, clear_path);
    write_image(hazy, hazy_path);

    ImagePair pair;
    pair.id = id;
    pair.hazy_path = hazy_path;
    pair.clear_path = clear_path;
    manifest.pairs.push_back(std::move(pair));
    params_log[id] = {{"k", params.k}, {"airlight", a}};
  }

  save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  std::ofstream plog(fs::path(out_dir) / "haze_params.json");
  plog << params_log.dump(2) << "\n";
  return manifest;
}

}  // namespace hazegan
