#ifndef ZSLFORGE_CADA_VAE_HPP
#define ZSLFORGE_CADA_VAE_HPP

#include "zslforge/common.hpp"
#include "zslforge/numeric.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace zslforge {

// y = x * W^T + b, rows are samples.
struct Affine {
  ParamTensor W;
  ParamTensor b;
};

// Encoder: ReLU MLP trunk ending in two linear heads (mu, logvar).
// Decoder: ReLU MLP with a linear output layer.
struct VaeParams {
  std::vector<Affine> encoder;
  Affine mu_head;
  Affine logvar_head;
  std::vector<Affine> decoder;

  static VaeParams init(const std::string& prefix, int input_dim,
                        const std::vector<int>& enc_hidden, int latent_dim,
                        const std::vector<int>& dec_hidden, Rng& rng);
  std::vector<ParamTensor*> all();
  int input_dim() const;
  int latent_dim() const { return static_cast<int>(mu_head.W.value.rows()); }
};

struct EncodeResult {
  std::vector<Mat> acts;  // acts[0] = input, acts[i] = post-ReLU of trunk layer i
  Mat mu;                 // B x latent
  Mat logvar;             // B x latent
};

EncodeResult vae_encode(const VaeParams& params, const Mat& x);

struct DecodeResult {
  std::vector<Mat> acts;  // acts[0] = z, then post-ReLU hidden activations
  Mat out;                // B x input_dim
};

DecodeResult vae_decode(const VaeParams& params, const Mat& z);

// z = mu + eps .* exp(0.5 * logvar)
Mat reparameterize(const Mat& mu, const Mat& logvar, const Mat& eps);

// -0.5 * sum_j (1 + logvar - mu^2 - exp(logvar)), mean over the batch.
double kl_divergence(const Mat& mu, const Mat& logvar);

// Mean absolute error over elements and batch.
double reconstruction_loss(const Mat& x, const Mat& x_hat);

// 2-Wasserstein distance between diagonal Gaussians, mean over the batch:
// sqrt(|mu_a - mu_b|^2 + |sigma_a - sigma_b|^2) with sigma = exp(0.5*logvar).
double distribution_alignment(const Mat& mu_a, const Mat& logvar_a, const Mat& mu_b,
                              const Mat& logvar_b);

struct CadaWeights {
  double beta = 0.0;
  double cross_recon = 0.0;
  double dist_align = 0.0;
};

struct CadaLossParts {
  double total = 0.0;
  double recon_img = 0.0;
  double recon_aux = 0.0;
  double kl_img = 0.0;
  double kl_aux = 0.0;
  double cross_img = 0.0;  // image reconstructed from the aux latent
  double cross_aux = 0.0;
  double dist_align = 0.0;
};

// Full objective with frozen noise; gradients are accumulated into the two
// parameter sets (zeroed first).
CadaLossParts cada_loss_and_grad(VaeParams& img_vae, VaeParams& aux_vae, const Mat& x,
                                 const Mat& t, const Mat& eps_x, const Mat& eps_t,
                                 const CadaWeights& weights);

// Forward-only evaluation with the same frozen noise (finite-difference oracle).
CadaLossParts cada_loss_value(const VaeParams& img_vae, const VaeParams& aux_vae, const Mat& x,
                              const Mat& t, const Mat& eps_x, const Mat& eps_t,
                              const CadaWeights& weights);

struct ClassifierConfig {
  double learning_rate = 0.001;
  int batch_size = 32;
  int epochs = 20;
  int n_latents_per_class = 200;

  nlohmann::json to_json() const;
  static ClassifierConfig from_json(const nlohmann::json& j);
};

struct CadaVaeConfig {
  int latent_dim = 64;
  std::vector<int> enc_img_hidden = {256};
  std::vector<int> dec_img_hidden = {256};
  std::vector<int> enc_aux_hidden = {256};
  std::vector<int> dec_aux_hidden = {256};
  int batch_size = 64;
  double vae_lr = 0.00015;
  bool amsgrad = true;
  double beta_factor = 0.25;
  int beta_start = 0, beta_end = 93;
  double cross_recon_factor = 2.37;
  int cross_recon_start = 21, cross_recon_end = 75;
  double dist_align_factor = 8.13;
  int dist_align_start = 6, dist_align_end = 22;
  int epochs = 100;
  std::uint64_t seed = 0;
  ClassifierConfig classifier;

  void validate() const;
  CadaWeights weights_at(int epoch) const;
  nlohmann::json to_json() const;
  static CadaVaeConfig from_json(const nlohmann::json& j);
};

struct CadaTrainResult {
  VaeParams img_vae;
  VaeParams aux_vae;
  std::vector<CadaLossParts> history;  // per-epoch means
};

// Trains the paired VAEs on seen-class samples; rows of `aux_seen` are the
// per-class vectors indexed by `labels`.
CadaTrainResult train_cada(const CadaVaeConfig& config, const Mat& images,
                           const std::vector<int>& labels, const Mat& aux_seen);

struct LabeledLatents {
  Mat z;                    // N x latent
  std::vector<int> labels;  // class index per row
};

// Fresh reparameterized draws from the aux encoder for every class row.
LabeledLatents sample_latents(const VaeParams& aux_vae, const Mat& aux_classes, int n_per_class,
                              std::uint64_t seed);

struct LatentClassifier {
  ParamTensor W;  // K x latent
  ParamTensor b;  // K x 1

  int n_classes() const { return static_cast<int>(W.value.rows()); }
  int latent_dim() const { return static_cast<int>(W.value.cols()); }
};

// Softmax cross entropy, mean over batch; gradients into W/b (zeroed first).
double classifier_loss_and_grad(LatentClassifier& clf, const Mat& z,
                                const std::vector<int>& labels);
double classifier_loss_only(const LatentClassifier& clf, const Mat& z,
                            const std::vector<int>& labels);

LatentClassifier train_latent_classifier(const LabeledLatents& data, int n_classes,
                                         const ClassifierConfig& config, std::uint64_t seed);

// Test-time: encode with mu only (no sampling), rank classifier logits
// descending, ties by ascending class index.
std::vector<Eigen::Index> classify_topk(const VaeParams& img_vae, const LatentClassifier& clf,
                                        const Vec& image, int k);
std::vector<std::vector<Eigen::Index>> classify_topk_batch(const VaeParams& img_vae,
                                                           const LatentClassifier& clf,
                                                           const Mat& images, int k);

void save_cada_checkpoint(const std::string& path, const VaeParams& img_vae,
                          const VaeParams& aux_vae, const LatentClassifier* clf,
                          const CadaVaeConfig& config);

struct CadaCheckpoint {
  VaeParams img_vae;
  VaeParams aux_vae;
  LatentClassifier classifier;
  bool has_classifier = false;
  CadaVaeConfig config;
};

CadaCheckpoint load_cada_checkpoint(const std::string& path);

}  // namespace zslforge

#endif  // ZSLFORGE_CADA_VAE_HPP
