#include "zslforge/hpo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <thread>

namespace zslforge {

using nlohmann::json;

double sample_log_uniform(double lo, double hi, Rng& rng) {
  if (lo <= 0.0 || hi <= 0.0) throw ConfigError("sample_log_uniform: bounds must be positive");
  if (lo > hi) throw ConfigError("sample_log_uniform: lo > hi");
  if (lo == hi) return lo;
  std::uniform_real_distribution<double> dist(std::log(lo), std::log(hi));
  return std::exp(dist(rng));
}

SimpleZslConfig sample_simple_config(Rng& rng) {
  static const std::vector<int> batch_sizes = {32, 128, 256, 512, 1024};
  static const std::vector<int> embed_dims = {32, 128, 256, 512, 1024};
  static const std::vector<double> beta1s = {0.5, 0.9};

  SimpleZslConfig c;
  c.batch_size = sample_choice(batch_sizes, rng);
  c.d_embed = sample_choice(embed_dims, rng);
  std::bernoulli_distribution margin_is_one(0.5);
  c.margin = margin_is_one(rng) ? 1.0 : sample_log_uniform(0.1, 100.0, rng);
  c.beta1 = sample_choice(beta1s, rng);
  c.learning_rate = sample_log_uniform(0.00003, 0.01, rng);
  return c;
}

CadaVaeConfig sample_cada_config(Rng& rng) {
  static const std::vector<int> batch_sizes = {32, 128, 256, 512, 1024};
  static const std::vector<int> latent_dims = {32, 128, 256, 512, 1024};
  static const std::vector<std::vector<int>> img_encoders = {
      {1560, 1560}, {2048, 1024}, {1560}, {1024, 512}};
  static const std::vector<std::vector<int>> img_decoders = {
      {1660}, {1024, 2048}, {1560}, {512}};
  static const std::vector<std::vector<int>> aux_encoders = {
      {1560, 1560}, {2048, 1024}, {1560}, {1024, 512}};
  static const std::vector<std::vector<int>> aux_decoders = {
      {1660}, {1024, 2048}, {1560}, {2048}, {512}};

  CadaVaeConfig c;
  c.batch_size = sample_choice(batch_sizes, rng);
  c.latent_dim = sample_choice(latent_dims, rng);
  c.enc_img_hidden = sample_choice(img_encoders, rng);
  c.dec_img_hidden = sample_choice(img_decoders, rng);
  c.enc_aux_hidden = sample_choice(aux_encoders, rng);
  c.dec_aux_hidden = sample_choice(aux_decoders, rng);
  std::bernoulli_distribution beta_is_one(0.3);
  c.beta_factor = beta_is_one(rng) ? 1.0 : sample_log_uniform(0.1, 30.0, rng);
  c.cross_recon_factor = sample_log_uniform(0.25, 50.0, rng);
  c.dist_align_factor = sample_log_uniform(0.25, 100.0, rng);
  return c;
}

json RunRecord::to_json() const {
  return json{{"trial_id", trial_id},       {"seed", seed},
              {"config", config},           {"epoch_losses", epoch_losses},
              {"val_top1", val_top1},       {"val_top5", val_top5},
              {"wall_seconds", wall_seconds}, {"status", status}};
}

std::vector<RunRecord> run_search(const TrialFn& trial, int n_trials, std::uint64_t seed,
                                  const std::optional<std::string>& out_dir, int n_workers) {
  if (n_trials < 1) throw ConfigError("run_search: n_trials must be >= 1");
  if (n_workers < 1) throw ConfigError("run_search: n_workers must be >= 1");
  if (out_dir) std::filesystem::create_directories(*out_dir);

  std::vector<RunRecord> records(static_cast<std::size_t>(n_trials));
  auto run_one = [&](int id) {
    RunRecord& rec = records[static_cast<std::size_t>(id)];
    rec.trial_id = id;
    rec.seed = seed ^ static_cast<std::uint64_t>(id);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      TrialResult r = trial(rec.seed);
      rec.config = std::move(r.config);
      rec.epoch_losses = std::move(r.epoch_losses);
      rec.val_top1 = r.val_top1;
      rec.val_top5 = r.val_top5;
      rec.status = "ok";
    } catch (const std::exception& e) {
      rec.status = std::string("failed: ") + e.what();
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (out_dir) {
      write_text_file(*out_dir + "/trial_" + std::to_string(id) + ".json",
                      rec.to_json().dump(2) + "\n");
    }
  };

  if (n_workers == 1) {
    for (int id = 0; id < n_trials; ++id) run_one(id);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int count = std::min(n_workers, n_trials);
    pool.reserve(static_cast<std::size_t>(count));
    for (int w = 0; w < count; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const int id = next.fetch_add(1);
          if (id >= n_trials) break;
          run_one(id);
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }

  std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    const bool a_ok = a.status == "ok", b_ok = b.status == "ok";
    if (a_ok != b_ok) return a_ok;
    if (a.val_top5 != b.val_top5) return a.val_top5 > b.val_top5;
    if (a.val_top1 != b.val_top1) return a.val_top1 > b.val_top1;
    return a.trial_id < b.trial_id;
  });

  if (out_dir) write_text_file(*out_dir + "/index.tsv", search_index_tsv(records));
  return records;
}

std::string search_index_tsv(const std::vector<RunRecord>& ranked) {
  std::string out = "rank\ttrial\tval_top5\tval_top1\tstatus\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    out += std::to_string(i + 1) + "\t" + std::to_string(ranked[i].trial_id) + "\t" +
           std::to_string(ranked[i].val_top5) + "\t" + std::to_string(ranked[i].val_top1) + "\t" +
           ranked[i].status + "\n";
  }
  return out;
}

}  // namespace zslforge
