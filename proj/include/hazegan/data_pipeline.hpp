#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hazegan/image.hpp"
#include "hazegan/tensor.hpp"

namespace hazegan {

struct ImagePair {
  std::string id;
  std::string hazy_path;
  std::string clear_path;  // empty for reference-free entries

  bool has_clear() const { return !clear_path.empty(); }
};

struct DatasetManifest {
  std::string source_name;
  bool has_references = true;
  std::vector<ImagePair> pairs;  // sorted by id, lexicographic bytewise

  size_t size() const { return pairs.size(); }
};

enum class DirLayout {
  kAuto,     // subdirs if <root>/hazy exists, otherwise suffix convention
  kSubdirs,  // <root>/hazy/<stem>.png + <root>/clear/<stem>.png
  kSuffix,   // <root>/<stem>_hazy.png + <root>/<stem>_gt.png
};

// Scans a directory into a manifest. Pairs with undecodable files or
// mismatched dimensions are skipped with a diagnostic. When no clear images
// match at all the manifest becomes reference-free.
DatasetManifest load_manifest(const std::string& root, DirLayout layout = DirLayout::kAuto,
                              std::vector<std::string>* diagnostics = nullptr);

// JSON persistence; paths stored relative to the manifest file's directory.
void save_manifest(const DatasetManifest& manifest, const std::string& json_path);
DatasetManifest read_manifest(const std::string& json_path);

struct SplitResult {
  DatasetManifest train;
  DatasetManifest test;
  uint64_t seed = 0;
  double ratio = 0.0;
};

// Deterministic shuffled partition; |test| = round(ratio * N).
SplitResult split(const DatasetManifest& manifest, double test_ratio, uint64_t seed);

// Decode, bilinear-resize to size x size and map [0,1] -> [-1,1].
Tensor to_net_tensor(const std::string& path, int size = 256,
                     std::vector<std::string>* diagnostics = nullptr);
Tensor image_to_net_tensor(const Image& img, int size);

// Inverse of the affine map, clamped to [0,1]. Accepts (1,3,H,W) or (3,H,W
// flattened into c-major) tensors.
Image from_net_tensor(const Tensor& t);

struct SyntheticConfig {
  int n = 200;
  int image_size = 64;
  uint64_t seed = 7;
  double k_min = 0.8, k_max = 2.2;
  double airlight_min = 0.7, airlight_max = 1.0;
};

// Renders procedural clear scenes (smooth albedo fields with geometric
// shapes), smooth depth maps, and per-image sampled haze parameters; writes
// hazy/ and clear/ trees plus manifest.json. Fully reproducible from seed.
DatasetManifest generate_synthetic_dataset(const std::string& out_dir,
                                           const SyntheticConfig& config);

}  // namespace hazegan
