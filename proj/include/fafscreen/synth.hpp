#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fafscreen/dataset_io.hpp"
#include "fafscreen/grid.hpp"
#include "fafscreen/image.hpp"
#include "fafscreen/svm.hpp"

namespace faf {

/// Lesion statistics for one disease tag. Contrast is an intensity offset
/// magnitude; each lesion is hypo-fluorescent (darker) with
/// `hypo_probability`, otherwise hyper-fluorescent.
struct LesionProfile {
  int count_min = 1;
  int count_max = 3;
  double radius_min = 10.0;
  double radius_max = 30.0;
  double contrast_min = 20.0;
  double contrast_max = 40.0;
  double hypo_probability = 0.5;
};

inline constexpr std::array<Disease, 3> kDiseaseTags = {Disease::STGD, Disease::CNVM, Disease::CSCR};

struct SynthParams {
  int image_size = 512;
  std::size_t n_healthy = 61;
  std::size_t n_diseased = 79;
  double background_level = 120.0;
  /// Relative std of the per-image gain applied to background and lesions.
  double background_jitter = 0.05;
  double foveal_dip_depth = 45.0;
  double foveal_dip_sigma = 35.0;
  double dip_jitter = 0.25;
  double noise_sigma = 6.0;
  double noise_jitter = 0.15;
  double grid_r3 = 180.0;
  /// Max displacement of the fovea from the image centre, per axis.
  double fovea_offset = 20.0;
  /// Per-lesion edge softness in pixels.
  double lesion_edge = 3.0;
  std::array<LesionProfile, 3> lesions = default_lesions();  // STGD, CNVM, CSCR
  std::array<double, 3> disease_mix = {44.0 / 79.0, 14.0 / 79.0, 21.0 / 79.0};
  std::uint64_t seed = 7;

  static std::array<LesionProfile, 3> default_lesions();
  const LesionProfile& lesion(Disease d) const;
  /// Throws InvalidArgument for infeasible parameters.
  void validate() const;
  /// Missing keys keep their defaults.
  static SynthParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SynthSample {
  std::string id;
  FafImage image;
  GridSpec grid;
  Label label;
  Disease disease;
};

/// Healthy images first, then diseased ones grouped by tag. Per-disease
/// counts come from largest-remainder apportionment of disease_mix. Each
/// image draws from its own RNG stream keyed by (seed, index).
std::vector<SynthSample> generate_dataset(const SynthParams& params, unsigned threads = 1);

Dataset featurize(const std::vector<SynthSample>& samples, unsigned threads = 1);

/// Writes <id>.pgm files plus manifest.csv into `dir`.
void write_synthetic(const std::vector<SynthSample>& samples, const std::filesystem::path& dir);

}  // namespace faf
