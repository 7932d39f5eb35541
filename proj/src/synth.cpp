#include "fafscreen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "fafscreen/parallel.hpp"
#include "fafscreen/rng.hpp"

namespace faf {

std::array<LesionProfile, 3> SynthParams::default_lesions() {
  return {{
      {2, 5, 18.0, 45.0, 45.0, 80.0, 0.85},  // STGD: atrophic hypo-AF with flecks
      {1, 3, 15.0, 40.0, 25.0, 55.0, 0.5},   // CNVM
      {1, 3, 15.0, 35.0, 20.0, 50.0, 0.3},   // CSCR
  }};
}

namespace {

std::size_t disease_slot(Disease d) {
  switch (d) {
    case Disease::STGD: return 0;
    case Disease::CNVM: return 1;
    case Disease::CSCR: return 2;
    case Disease::NONE: break;
  }
  throw InvalidArgument("no lesion profile for disease NONE");
}

std::vector<std::size_t> apportion(std::size_t total, const std::array<double, 3>& mix) {
  std::vector<std::size_t> counts(3);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = mix[k] * static_cast<double>(total);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[k];
    remainders.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[remainders[k % 3].second];
  return counts;
}

struct ImagePlan {
  Label label;
  Disease disease;
};

SynthSample render(const SynthParams& p, std::size_t index, const ImagePlan& plan) {
  CounterRng rng(p.seed, index);
  const int size = p.image_size;
  const double gain = std::max(0.0, 1.0 + p.background_jitter * rng.normal());
  const double dip = p.foveal_dip_depth * std::max(0.0, 1.0 + p.dip_jitter * rng.normal());
  const double noise = p.noise_sigma * std::max(0.0, 1.0 + p.noise_jitter * rng.normal());
  const double cx = size / 2.0 + rng.uniform(-p.fovea_offset, p.fovea_offset);
  const double cy = size / 2.0 + rng.uniform(-p.fovea_offset, p.fovea_offset);
  const Laterality lat = rng.below(2) == 0 ? Laterality::OD : Laterality::OS;

  std::vector<double> field(static_cast<std::size_t>(size) * size, p.background_level * gain);
  const double two_s2 = 2.0 * p.foveal_dip_sigma * p.foveal_dip_sigma;
  if (dip > 0.0) {
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        field[static_cast<std::size_t>(y) * size + x] -= dip * gain * std::exp(-(dx * dx + dy * dy) / two_s2);
      }
  }

  if (plan.label == Label::Diseased) {
    const auto& lp = p.lesion(plan.disease);
    const auto count = rng.between(lp.count_min, lp.count_max);
    for (long long l = 0; l < count; ++l) {
      const double major = rng.uniform(lp.radius_min, lp.radius_max);
      const double minor = major * rng.uniform(0.5, 1.0);
      const double angle = rng.uniform(0.0, std::numbers::pi);
      const double reach = std::sqrt(rng.uniform()) * (p.grid_r3 - major);
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double contrast = rng.uniform(lp.contrast_min, lp.contrast_max);
      const double delta = (rng.uniform() < lp.hypo_probability ? -contrast : contrast) * gain;
      const double lx = cx + reach * std::cos(theta);
      const double ly = cy + reach * std::sin(theta);
      const double ca = std::cos(angle);
      const double sa = std::sin(angle);
      const double pad = major + 6.0 * p.lesion_edge;
      const int x0 = std::max(0, static_cast<int>(std::floor(lx - pad)));
      const int x1 = std::min(size, static_cast<int>(std::ceil(lx + pad)) + 1);
      const int y0 = std::max(0, static_cast<int>(std::floor(ly - pad)));
      const int y1 = std::min(size, static_cast<int>(std::ceil(ly + pad)) + 1);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          const double dx = x + 0.5 - lx;
          const double dy = y + 0.5 - ly;
          const double u = (dx * ca + dy * sa) / major;
          const double v = (-dx * sa + dy * ca) / minor;
          const double edge = (std::sqrt(u * u + v * v) - 1.0) * major / p.lesion_edge;
          field[static_cast<std::size_t>(y) * size + x] += delta / (1.0 + std::exp(edge));
        }
    }
  }

  std::vector<std::uint16_t> pixels(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double v = noise > 0.0 ? field[i] + noise * rng.normal() : field[i];
    pixels[i] = static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 255.0));
  }

  char id[32];
  std::snprintf(id, sizeof id, "img_%04zu", index);
  return SynthSample{id, FafImage(size, size, std::move(pixels), 255, lat),
                     GridSpec::with_default_radii(cx, cy, p.grid_r3, lat), plan.label, plan.disease};
}

}  // namespace

const LesionProfile& SynthParams::lesion(Disease d) const { return lesions[disease_slot(d)]; }

void SynthParams::validate() const {
  if (image_size < 16) throw InvalidArgument("synth: image_size must be at least 16");
  if (n_healthy < 2 || n_diseased < 2) throw InvalidArgument("synth: need at least 2 samples per class");
  if (!(background_level >= 0.0) || !(noise_sigma >= 0.0) || !(foveal_dip_depth >= 0.0))
    throw InvalidArgument("synth: levels must be non-negative");
  if (!(foveal_dip_sigma > 0.0) || !(lesion_edge > 0.0)) throw InvalidArgument("synth: widths must be positive");
  if (!(background_jitter >= 0.0 && dip_jitter >= 0.0 && noise_jitter >= 0.0))
    throw InvalidArgument("synth: jitters must be non-negative");
  if (!(grid_r3 > 0.0) || !(fovea_offset >= 0.0)) throw InvalidArgument("synth: bad grid geometry");
  if (fovea_offset + grid_r3 >= image_size / 2.0)
    throw InvalidArgument("synth: grid (r3 + fovea offset) does not fit inside the image");
  double mix_sum = 0.0;
  for (double m : disease_mix) {
    if (!(m >= 0.0)) throw InvalidArgument("synth: disease mix must be non-negative");
    mix_sum += m;
  }
  if (std::fabs(mix_sum - 1.0) > 1e-9) throw InvalidArgument("synth: disease mix must sum to 1");
  for (const auto& lp : lesions) {
    if (lp.count_min < 0 || lp.count_min > lp.count_max) throw InvalidArgument("synth: empty lesion count range");
    if (!(lp.radius_min > 0.0 && lp.radius_min <= lp.radius_max))
      throw InvalidArgument("synth: empty lesion radius range");
    if (!(lp.contrast_min >= 0.0 && lp.contrast_min <= lp.contrast_max))
      throw InvalidArgument("synth: empty lesion contrast range");
    if (!(lp.hypo_probability >= 0.0 && lp.hypo_probability <= 1.0))
      throw InvalidArgument("synth: hypo_probability must lie in [0, 1]");
    if (lp.radius_max >= grid_r3) throw InvalidArgument("synth: infeasible params, lesion larger than grid");
  }
}

namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_range(const nlohmann::json& j, const char* key, auto& lo, auto& hi) {
  if (!j.contains(key)) return;
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2) throw InvalidArgument(std::string("synth params: '") + key + "' must be [min, max]");
  lo = r[0].get<std::remove_reference_t<decltype(lo)>>();
  hi = r[1].get<std::remove_reference_t<decltype(hi)>>();
}

}  // namespace

SynthParams SynthParams::from_json(const nlohmann::json& j) {
  SynthParams p;
  if (!j.is_object()) throw InvalidArgument("synth params: expected a JSON object");
  try {
    read_opt(j, "image_size", p.image_size);
    read_opt(j, "n_healthy", p.n_healthy);
    read_opt(j, "n_diseased", p.n_diseased);
    read_opt(j, "background_level", p.background_level);
    read_opt(j, "background_jitter", p.background_jitter);
    read_opt(j, "foveal_dip_depth", p.foveal_dip_depth);
    read_opt(j, "foveal_dip_sigma", p.foveal_dip_sigma);
    read_opt(j, "dip_jitter", p.dip_jitter);
    read_opt(j, "noise_sigma", p.noise_sigma);
    read_opt(j, "noise_jitter", p.noise_jitter);
    read_opt(j, "grid_r3", p.grid_r3);
    read_opt(j, "fovea_offset", p.fovea_offset);
    read_opt(j, "lesion_edge", p.lesion_edge);
    read_opt(j, "seed", p.seed);
    for (auto d : kDiseaseTags) {
      const std::string tag(to_string(d));
      if (j.contains("lesions") && j["lesions"].contains(tag)) {
        const auto& lj = j["lesions"][tag];
        auto& lp = p.lesions[disease_slot(d)];
        read_range(lj, "count", lp.count_min, lp.count_max);
        read_range(lj, "radius", lp.radius_min, lp.radius_max);
        read_range(lj, "contrast", lp.contrast_min, lp.contrast_max);
        read_opt(lj, "hypo_probability", lp.hypo_probability);
      }
      if (j.contains("disease_mix")) read_opt(j["disease_mix"], tag.c_str(), p.disease_mix[disease_slot(d)]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("synth params: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json SynthParams::to_json() const {
  nlohmann::json j = {{"image_size", image_size},
                      {"n_healthy", n_healthy},
                      {"n_diseased", n_diseased},
                      {"background_level", background_level},
                      {"background_jitter", background_jitter},
                      {"foveal_dip_depth", foveal_dip_depth},
                      {"foveal_dip_sigma", foveal_dip_sigma},
                      {"dip_jitter", dip_jitter},
                      {"noise_sigma", noise_sigma},
                      {"noise_jitter", noise_jitter},
                      {"grid_r3", grid_r3},
                      {"fovea_offset", fovea_offset},
                      {"lesion_edge", lesion_edge},
                      {"seed", seed}};
  for (auto d : kDiseaseTags) {
    const std::string tag(to_string(d));
    const auto& lp = lesion(d);
    j["lesions"][tag] = {{"count", {lp.count_min, lp.count_max}},
                         {"radius", {lp.radius_min, lp.radius_max}},
                         {"contrast", {lp.contrast_min, lp.contrast_max}},
                         {"hypo_probability", lp.hypo_probability}};
    j["disease_mix"][tag] = disease_mix[disease_slot(d)];
  }
  return j;
}

std::vector<SynthSample> generate_dataset(const SynthParams& params, unsigned threads) {
  params.validate();
  std::vector<ImagePlan> plans(params.n_healthy, ImagePlan{Label::Healthy, Disease::NONE});
  const auto per_disease = apportion(params.n_diseased, params.disease_mix);
  for (std::size_t k = 0; k < 3; ++k)
    plans.insert(plans.end(), per_disease[k], ImagePlan{Label::Diseased, kDiseaseTags[k]});

  std::vector<std::optional<SynthSample>> slots(plans.size());
  parallel_for(plans.size(), threads, [&](std::size_t i) { slots[i] = render(params, i, plans[i]); });
  std::vector<SynthSample> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

Dataset featurize(const std::vector<SynthSample>& samples, unsigned threads) {
  Dataset data;
  data.samples.resize(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto& s = samples[i];
    data.samples[i] = LabeledSample{s.id, to_vector(compute_features(s.image, s.grid)), s.label, s.disease};
  });
  return data;
}

void write_synthetic(const std::vector<SynthSample>& samples, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> manifest;
  for (const auto& s : samples) {
    const std::string file = s.id + ".pgm";
    write_file(dir / file, encode_pgm(s.image, PgmEncoding::Binary));
    manifest.push_back({file, s.label, s.disease, s.grid});
  }
  write_text_file(dir / "manifest.csv", write_manifest(manifest));
}

}  // namespace faf
