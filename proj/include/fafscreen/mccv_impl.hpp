#pragma once

#include <string>

#include "fafscreen/parallel.hpp"

namespace faf {

template <typename Result, typename Fn>
std::vector<Result> map_iterations(const Dataset& data, const SvmConfig& cfg, const SplitSpec& split,
                                   unsigned threads, Fn&& fn) {
  split.validate();
  cfg.validate();
  const auto counts = data.class_counts();
  stratified_train_count(counts.diseased, split.train_fraction);
  stratified_train_count(counts.healthy, split.train_fraction);

  std::vector<Result> results(split.iterations);
  parallel_for(split.iterations, threads, [&](std::size_t k) {
    auto rng = iteration_rng(split.base_seed, k);
    const auto indices = stratified_split(data, split.train_fraction, rng);
    SvmModel model;
    try {
      model = faf::train(data.subset(indices.train), cfg, split.base_seed + k);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("MCCV iteration " + std::to_string(k) + ": " + e.what(), e.best_model());
    }
    results[k] = fn(k, indices, std::move(model));
  });
  return results;
}

}  // namespace faf
