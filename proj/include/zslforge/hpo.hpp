#ifndef ZSLFORGE_HPO_HPP
#define ZSLFORGE_HPO_HPP

#include "zslforge/cada_vae.hpp"
#include "zslforge/common.hpp"
#include "zslforge/simple_zsl.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace zslforge {

// exp(U(ln lo, ln hi)); lo == hi collapses to lo.
double sample_log_uniform(double lo, double hi, Rng& rng);

template <typename T>
const T& sample_choice(const std::vector<T>& options, Rng& rng) {
  if (options.empty()) throw ConfigError("sample_choice: empty option set");
  std::uniform_int_distribution<std::size_t> dist(0, options.size() - 1);
  return options[dist(rng)];
}

// Hyperparameter draws follow the published search ranges: categorical sets
// for batch size / projection dim / beta1, log-uniform intervals for margin
// and learning rate, and the margin's point mass at 1 with probability 0.5.
SimpleZslConfig sample_simple_config(Rng& rng);

// CADA-VAE draw: categorical layer layouts and latent size, log-uniform loss
// factors with the beta point mass at 1 (probability 0.3); fixed fields keep
// their defaults (AMSGrad, vae_lr, schedule windows, classifier settings).
CadaVaeConfig sample_cada_config(Rng& rng);

struct TrialResult {
  nlohmann::json config;
  std::vector<double> epoch_losses;
  double val_top1 = 0.0;
  double val_top5 = 0.0;
};

using TrialFn = std::function<TrialResult(std::uint64_t trial_seed)>;

struct RunRecord {
  int trial_id = 0;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<double> epoch_losses;
  double val_top1 = 0.0;
  double val_top5 = 0.0;
  double wall_seconds = 0.0;
  std::string status;  // "ok" or "failed: <reason>"

  nlohmann::json to_json() const;
};

// Runs n trials with per-trial seeds seed^trial_id, ranks by val top-5
// (ties: top-1, then trial id). Failures are recorded, never fatal. When
// out_dir is set every record lands in trial_<id>.json plus an index.tsv.
// n_workers > 1 runs trials concurrently; results are identical because every
// trial owns its seed and state.
std::vector<RunRecord> run_search(const TrialFn& trial, int n_trials, std::uint64_t seed,
                                  const std::optional<std::string>& out_dir = std::nullopt,
                                  int n_workers = 1);

std::string search_index_tsv(const std::vector<RunRecord>& ranked);

}  // namespace zslforge

#endif  // ZSLFORGE_HPO_HPP
