#include "zslforge/cada_vae.hpp"

#include "zslforge/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace zslforge {

using nlohmann::json;

namespace {

Mat affine_forward(const Affine& layer, const Mat& x) {
  Mat y = x * layer.W.value.transpose();
  y.rowwise() += layer.b.value.col(0).transpose();
  return y;
}

// Accumulates layer gradients and returns the gradient w.r.t. the input.
Mat affine_backward(Affine& layer, const Mat& input, const Mat& d_out) {
  layer.W.grad += d_out.transpose() * input;
  layer.b.grad += d_out.colwise().sum().transpose();
  return d_out * layer.W.value;
}

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

// ReLU subgradient: 0 at exactly 0. The mask comes from the post-activation.
Mat relu_backward(const Mat& post, const Mat& d_post) {
  return (post.array() > 0.0).cast<double>() * d_post.array();
}

Mat sign_of(const Mat& a) {
  return a.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

}  // namespace

VaeParams VaeParams::init(const std::string& prefix, int input_dim,
                          const std::vector<int>& enc_hidden, int latent_dim,
                          const std::vector<int>& dec_hidden, Rng& rng) {
  if (input_dim < 1 || latent_dim < 1) throw ConfigError("vae init: dims must be >= 1");
  VaeParams p;
  int in = input_dim;
  for (std::size_t i = 0; i < enc_hidden.size(); ++i) {
    const int out = enc_hidden[i];
    Affine l;
    l.W = init_linear(prefix + ".enc" + std::to_string(i) + ".W", out, in, rng);
    l.b = init_bias(prefix + ".enc" + std::to_string(i) + ".b", out);
    p.encoder.push_back(std::move(l));
    in = out;
  }
  p.mu_head.W = init_linear(prefix + ".mu.W", latent_dim, in, rng);
  p.mu_head.b = init_bias(prefix + ".mu.b", latent_dim);
  p.logvar_head.W = init_linear(prefix + ".logvar.W", latent_dim, in, rng);
  p.logvar_head.b = init_bias(prefix + ".logvar.b", latent_dim);
  in = latent_dim;
  for (std::size_t i = 0; i < dec_hidden.size(); ++i) {
    const int out = dec_hidden[i];
    Affine l;
    l.W = init_linear(prefix + ".dec" + std::to_string(i) + ".W", out, in, rng);
    l.b = init_bias(prefix + ".dec" + std::to_string(i) + ".b", out);
    p.decoder.push_back(std::move(l));
    in = out;
  }
  Affine out_layer;
  out_layer.W = init_linear(prefix + ".dec" + std::to_string(dec_hidden.size()) + ".W", input_dim,
                            in, rng);
  out_layer.b = init_bias(prefix + ".dec" + std::to_string(dec_hidden.size()) + ".b", input_dim);
  p.decoder.push_back(std::move(out_layer));
  return p;
}

std::vector<ParamTensor*> VaeParams::all() {
  std::vector<ParamTensor*> out;
  for (Affine& l : encoder) {
    out.push_back(&l.W);
    out.push_back(&l.b);
  }
  out.push_back(&mu_head.W);
  out.push_back(&mu_head.b);
  out.push_back(&logvar_head.W);
  out.push_back(&logvar_head.b);
  for (Affine& l : decoder) {
    out.push_back(&l.W);
    out.push_back(&l.b);
  }
  return out;
}

int VaeParams::input_dim() const {
  if (!encoder.empty()) return static_cast<int>(encoder.front().W.value.cols());
  return static_cast<int>(mu_head.W.value.cols());
}

EncodeResult vae_encode(const VaeParams& params, const Mat& x) {
  if (x.cols() != params.input_dim())
    throw DataError("vae_encode: input dim " + std::to_string(x.cols()) + " != " +
                    std::to_string(params.input_dim()));
  EncodeResult r;
  r.acts.push_back(x);
  for (const Affine& l : params.encoder) r.acts.push_back(relu(affine_forward(l, r.acts.back())));
  r.mu = affine_forward(params.mu_head, r.acts.back());
  r.logvar = affine_forward(params.logvar_head, r.acts.back());
  return r;
}

DecodeResult vae_decode(const VaeParams& params, const Mat& z) {
  DecodeResult r;
  r.acts.push_back(z);
  for (std::size_t i = 0; i + 1 < params.decoder.size(); ++i)
    r.acts.push_back(relu(affine_forward(params.decoder[i], r.acts.back())));
  r.out = affine_forward(params.decoder.back(), r.acts.back());
  return r;
}

Mat reparameterize(const Mat& mu, const Mat& logvar, const Mat& eps) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || mu.rows() != eps.rows() ||
      mu.cols() != eps.cols())
    throw DataError("reparameterize: shape mismatch");
  return mu.array() + eps.array() * (0.5 * logvar.array()).exp();
}

double kl_divergence(const Mat& mu, const Mat& logvar) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols())
    throw DataError("kl_divergence: shape mismatch");
  if (mu.rows() == 0) return 0.0;
  const double sum =
      (-0.5 * (1.0 + logvar.array() - mu.array().square() - logvar.array().exp())).sum();
  return sum / static_cast<double>(mu.rows());
}

double reconstruction_loss(const Mat& x, const Mat& x_hat) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
    throw DataError("reconstruction_loss: shape mismatch");
  if (x.size() == 0) return 0.0;
  return (x - x_hat).array().abs().sum() / static_cast<double>(x.size());
}

double distribution_alignment(const Mat& mu_a, const Mat& logvar_a, const Mat& mu_b,
                              const Mat& logvar_b) {
  if (mu_a.rows() != mu_b.rows() || mu_a.cols() != mu_b.cols())
    throw DataError("distribution_alignment: shape mismatch");
  if (mu_a.rows() == 0) return 0.0;
  const Mat sig_a = (0.5 * logvar_a.array()).exp();
  const Mat sig_b = (0.5 * logvar_b.array()).exp();
  double total = 0.0;
  for (Eigen::Index r = 0; r < mu_a.rows(); ++r) {
    const double d2 = (mu_a.row(r) - mu_b.row(r)).squaredNorm() +
                      (sig_a.row(r) - sig_b.row(r)).squaredNorm();
    total += std::sqrt(d2);
  }
  return total / static_cast<double>(mu_a.rows());
}

namespace {

struct VaeForward {
  EncodeResult enc;
  Mat sigma;
  Mat z;
  DecodeResult dec;        // own-modality reconstruction
  DecodeResult dec_cross;  // reconstruction from the other modality's latent
};

CadaLossParts forward_all(const VaeParams& img_vae, const VaeParams& aux_vae, const Mat& x,
                          const Mat& t, const Mat& eps_x, const Mat& eps_t, VaeForward& fx,
                          VaeForward& ft) {
  fx.enc = vae_encode(img_vae, x);
  ft.enc = vae_encode(aux_vae, t);
  fx.sigma = (0.5 * fx.enc.logvar.array()).exp();
  ft.sigma = (0.5 * ft.enc.logvar.array()).exp();
  fx.z = fx.enc.mu.array() + eps_x.array() * fx.sigma.array();
  ft.z = ft.enc.mu.array() + eps_t.array() * ft.sigma.array();
  fx.dec = vae_decode(img_vae, fx.z);
  ft.dec = vae_decode(aux_vae, ft.z);
  fx.dec_cross = vae_decode(img_vae, ft.z);  // image decoded from aux latent
  ft.dec_cross = vae_decode(aux_vae, fx.z);

  CadaLossParts parts;
  parts.recon_img = reconstruction_loss(x, fx.dec.out);
  parts.recon_aux = reconstruction_loss(t, ft.dec.out);
  parts.kl_img = kl_divergence(fx.enc.mu, fx.enc.logvar);
  parts.kl_aux = kl_divergence(ft.enc.mu, ft.enc.logvar);
  parts.cross_img = reconstruction_loss(x, fx.dec_cross.out);
  parts.cross_aux = reconstruction_loss(t, ft.dec_cross.out);
  parts.dist_align =
      distribution_alignment(fx.enc.mu, fx.enc.logvar, ft.enc.mu, ft.enc.logvar);
  return parts;
}

double combine(CadaLossParts& parts, const CadaWeights& w) {
  parts.total = parts.recon_img + parts.recon_aux + w.beta * (parts.kl_img + parts.kl_aux) +
                w.cross_recon * (parts.cross_img + parts.cross_aux) +
                w.dist_align * parts.dist_align;
  return parts.total;
}

Mat decode_backward(VaeParams& params, const DecodeResult& cache, const Mat& d_out) {
  Mat d = affine_backward(params.decoder.back(), cache.acts.back(), d_out);
  for (std::size_t i = params.decoder.size() - 1; i-- > 0;) {
    d = relu_backward(cache.acts[i + 1], d);
    d = affine_backward(params.decoder[i], cache.acts[i], d);
  }
  return d;
}

void encode_backward(VaeParams& params, const EncodeResult& cache, const Mat& d_mu,
                     const Mat& d_logvar) {
  Mat d = affine_backward(params.mu_head, cache.acts.back(), d_mu);
  d += affine_backward(params.logvar_head, cache.acts.back(), d_logvar);
  for (std::size_t i = params.encoder.size(); i-- > 0;) {
    d = relu_backward(cache.acts[i + 1], d);
    d = affine_backward(params.encoder[i], cache.acts[i], d);
  }
}

}  // namespace

CadaLossParts cada_loss_and_grad(VaeParams& img_vae, VaeParams& aux_vae, const Mat& x,
                                 const Mat& t, const Mat& eps_x, const Mat& eps_t,
                                 const CadaWeights& weights) {
  if (x.rows() != t.rows()) throw DataError("cada loss: image/aux rows must be paired");
  for (ParamTensor* p : img_vae.all()) p->zero_grad();
  for (ParamTensor* p : aux_vae.all()) p->zero_grad();

  VaeForward fx, ft;
  CadaLossParts parts = forward_all(img_vae, aux_vae, x, t, eps_x, eps_t, fx, ft);
  combine(parts, weights);

  const double batch = static_cast<double>(x.rows());
  const double inv_img = 1.0 / (batch * static_cast<double>(x.cols()));
  const double inv_aux = 1.0 / (batch * static_cast<double>(t.cols()));

  // L1 reconstruction terms.
  const Mat d_xhat = sign_of(fx.dec.out - x) * inv_img;
  const Mat d_that = sign_of(ft.dec.out - t) * inv_aux;
  Mat d_zx = decode_backward(img_vae, fx.dec, d_xhat);
  Mat d_zt = decode_backward(aux_vae, ft.dec, d_that);

  // Cross reconstruction: image decoder sees the aux latent and vice versa.
  if (weights.cross_recon != 0.0) {
    const Mat d_xc = sign_of(fx.dec_cross.out - x) * (weights.cross_recon * inv_img);
    const Mat d_tc = sign_of(ft.dec_cross.out - t) * (weights.cross_recon * inv_aux);
    d_zt += decode_backward(img_vae, fx.dec_cross, d_xc);
    d_zx += decode_backward(aux_vae, ft.dec_cross, d_tc);
  }

  // Through the reparameterization (eps frozen).
  Mat d_mu_x = d_zx;
  Mat d_lv_x = (d_zx.array() * eps_x.array() * 0.5 * fx.sigma.array()).matrix();
  Mat d_mu_t = d_zt;
  Mat d_lv_t = (d_zt.array() * eps_t.array() * 0.5 * ft.sigma.array()).matrix();

  // KL terms.
  if (weights.beta != 0.0) {
    d_mu_x += (weights.beta / batch) * fx.enc.mu;
    d_lv_x.array() += (weights.beta / batch) * 0.5 * (fx.enc.logvar.array().exp() - 1.0);
    d_mu_t += (weights.beta / batch) * ft.enc.mu;
    d_lv_t.array() += (weights.beta / batch) * 0.5 * (ft.enc.logvar.array().exp() - 1.0);
  }

  // Distribution alignment; subgradient 0 where the distance vanishes.
  if (weights.dist_align != 0.0) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Vec dmu = (fx.enc.mu.row(r) - ft.enc.mu.row(r)).transpose();
      const Vec dsig = (fx.sigma.row(r) - ft.sigma.row(r)).transpose();
      const double dist = std::sqrt(dmu.squaredNorm() + dsig.squaredNorm());
      if (dist <= 0.0) continue;
      const double scale = weights.dist_align / (batch * dist);
      d_mu_x.row(r) += scale * dmu.transpose();
      d_mu_t.row(r) -= scale * dmu.transpose();
      const Vec d_sig_term = scale * dsig;
      d_lv_x.row(r).array() += d_sig_term.transpose().array() * 0.5 * fx.sigma.row(r).array();
      d_lv_t.row(r).array() -= d_sig_term.transpose().array() * 0.5 * ft.sigma.row(r).array();
    }
  }

  encode_backward(img_vae, fx.enc, d_mu_x, d_lv_x);
  encode_backward(aux_vae, ft.enc, d_mu_t, d_lv_t);
  return parts;
}

CadaLossParts cada_loss_value(const VaeParams& img_vae, const VaeParams& aux_vae, const Mat& x,
                              const Mat& t, const Mat& eps_x, const Mat& eps_t,
                              const CadaWeights& weights) {
  VaeForward fx, ft;
  CadaLossParts parts = forward_all(img_vae, aux_vae, x, t, eps_x, eps_t, fx, ft);
  combine(parts, weights);
  return parts;
}

json ClassifierConfig::to_json() const {
  return json{{"learning_rate", learning_rate},
              {"batch_size", batch_size},
              {"epochs", epochs},
              {"n_latents_per_class", n_latents_per_class}};
}

ClassifierConfig ClassifierConfig::from_json(const json& j) {
  static const std::vector<std::string> known = {"learning_rate", "batch_size", "epochs",
                                                 "n_latents_per_class"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("classifier config: unknown key '" + it.key() + "'");
  }
  ClassifierConfig c;
  if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
  if (j.contains("n_latents_per_class"))
    c.n_latents_per_class = j["n_latents_per_class"].get<int>();
  return c;
}

void CadaVaeConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("cada config: latent_dim must be >= 1");
  if (batch_size < 1) throw ConfigError("cada config: batch_size must be >= 1");
  if (vae_lr <= 0) throw ConfigError("cada config: vae_lr must be > 0");
  if (epochs < 0) throw ConfigError("cada config: epochs must be >= 0");
  if (beta_factor < 0 || cross_recon_factor < 0 || dist_align_factor < 0)
    throw ConfigError("cada config: loss factors must be >= 0");
  // Constructors validate the schedule windows.
  WarmupSchedule(beta_factor, beta_start, beta_end);
  WarmupSchedule(cross_recon_factor, cross_recon_start, cross_recon_end);
  WarmupSchedule(dist_align_factor, dist_align_start, dist_align_end);
  if (classifier.batch_size < 1 || classifier.epochs < 0 || classifier.n_latents_per_class < 1)
    throw ConfigError("cada config: bad classifier settings");
}

CadaWeights CadaVaeConfig::weights_at(int epoch) const {
  CadaWeights w;
  w.beta = WarmupSchedule(beta_factor, beta_start, beta_end).weight(epoch);
  w.cross_recon =
      WarmupSchedule(cross_recon_factor, cross_recon_start, cross_recon_end).weight(epoch);
  w.dist_align =
      WarmupSchedule(dist_align_factor, dist_align_start, dist_align_end).weight(epoch);
  return w;
}

json CadaVaeConfig::to_json() const {
  return json{{"latent_dim", latent_dim},
              {"enc_img_hidden", enc_img_hidden},
              {"dec_img_hidden", dec_img_hidden},
              {"enc_aux_hidden", enc_aux_hidden},
              {"dec_aux_hidden", dec_aux_hidden},
              {"batch_size", batch_size},
              {"vae_lr", vae_lr},
              {"amsgrad", amsgrad},
              {"beta_factor", beta_factor},
              {"beta_start", beta_start},
              {"beta_end", beta_end},
              {"cross_recon_factor", cross_recon_factor},
              {"cross_recon_start", cross_recon_start},
              {"cross_recon_end", cross_recon_end},
              {"dist_align_factor", dist_align_factor},
              {"dist_align_start", dist_align_start},
              {"dist_align_end", dist_align_end},
              {"epochs", epochs},
              {"seed", seed},
              {"classifier", classifier.to_json()}};
}

CadaVaeConfig CadaVaeConfig::from_json(const json& j) {
  static const std::vector<std::string> known = {
      "latent_dim", "enc_img_hidden", "dec_img_hidden", "enc_aux_hidden", "dec_aux_hidden",
      "batch_size", "vae_lr", "amsgrad", "beta_factor", "beta_start", "beta_end",
      "cross_recon_factor", "cross_recon_start", "cross_recon_end", "dist_align_factor",
      "dist_align_start", "dist_align_end", "epochs", "seed", "classifier"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("cada config: unknown key '" + it.key() + "'");
  }
  CadaVaeConfig c;
  if (j.contains("latent_dim")) c.latent_dim = j["latent_dim"].get<int>();
  if (j.contains("enc_img_hidden")) c.enc_img_hidden = j["enc_img_hidden"].get<std::vector<int>>();
  if (j.contains("dec_img_hidden")) c.dec_img_hidden = j["dec_img_hidden"].get<std::vector<int>>();
  if (j.contains("enc_aux_hidden")) c.enc_aux_hidden = j["enc_aux_hidden"].get<std::vector<int>>();
  if (j.contains("dec_aux_hidden")) c.dec_aux_hidden = j["dec_aux_hidden"].get<std::vector<int>>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("vae_lr")) c.vae_lr = j["vae_lr"].get<double>();
  if (j.contains("amsgrad")) c.amsgrad = j["amsgrad"].get<bool>();
  if (j.contains("beta_factor")) c.beta_factor = j["beta_factor"].get<double>();
  if (j.contains("beta_start")) c.beta_start = j["beta_start"].get<int>();
  if (j.contains("beta_end")) c.beta_end = j["beta_end"].get<int>();
  if (j.contains("cross_recon_factor"))
    c.cross_recon_factor = j["cross_recon_factor"].get<double>();
  if (j.contains("cross_recon_start")) c.cross_recon_start = j["cross_recon_start"].get<int>();
  if (j.contains("cross_recon_end")) c.cross_recon_end = j["cross_recon_end"].get<int>();
  if (j.contains("dist_align_factor"))
    c.dist_align_factor = j["dist_align_factor"].get<double>();
  if (j.contains("dist_align_start")) c.dist_align_start = j["dist_align_start"].get<int>();
  if (j.contains("dist_align_end")) c.dist_align_end = j["dist_align_end"].get<int>();
  if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("classifier")) c.classifier = ClassifierConfig::from_json(j["classifier"]);
  c.validate();
  return c;
}

CadaTrainResult train_cada(const CadaVaeConfig& config, const Mat& images,
                           const std::vector<int>& labels, const Mat& aux_seen) {
  config.validate();
  if (images.rows() == 0) throw DataError("train_cada: empty training set");
  if (static_cast<Eigen::Index>(labels.size()) != images.rows())
    throw DataError("train_cada: labels/rows mismatch");
  for (int y : labels) {
    if (y < 0 || y >= aux_seen.rows())
      throw DataError("train_cada: label " + std::to_string(y) + " out of range");
  }

  Rng init_rng = make_rng(config.seed);
  CadaTrainResult result;
  result.img_vae = VaeParams::init("img", static_cast<int>(images.cols()), config.enc_img_hidden,
                                   config.latent_dim, config.dec_img_hidden, init_rng);
  result.aux_vae = VaeParams::init("aux", static_cast<int>(aux_seen.cols()), config.enc_aux_hidden,
                                   config.latent_dim, config.dec_aux_hidden, init_rng);

  std::vector<ParamTensor*> params = result.img_vae.all();
  for (ParamTensor* p : result.aux_vae.all()) params.push_back(p);
  AdamHyper hyper;
  hyper.lr = config.vae_lr;
  hyper.amsgrad = config.amsgrad;
  AdamOptimizer opt(hyper, params);

  Rng noise_rng = make_rng(derive_seed(config.seed, 0xE75));
  std::normal_distribution<double> normal(0.0, 1.0);

  const Eigen::Index n = images.rows();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng = make_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);
    const CadaWeights w = config.weights_at(epoch);

    CadaLossParts epoch_mean;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index bsize = std::min<Eigen::Index>(config.batch_size, n - start);
      Mat xb(bsize, images.cols());
      Mat tb(bsize, aux_seen.cols());
      for (Eigen::Index i = 0; i < bsize; ++i) {
        const Eigen::Index src = perm[static_cast<std::size_t>(start + i)];
        xb.row(i) = images.row(src);
        tb.row(i) = aux_seen.row(labels[static_cast<std::size_t>(src)]);
      }
      Mat eps_x(bsize, config.latent_dim), eps_t(bsize, config.latent_dim);
      for (Eigen::Index i = 0; i < bsize; ++i) {
        for (int jdx = 0; jdx < config.latent_dim; ++jdx) {
          eps_x(i, jdx) = normal(noise_rng);
          eps_t(i, jdx) = normal(noise_rng);
        }
      }
      const CadaLossParts parts =
          cada_loss_and_grad(result.img_vae, result.aux_vae, xb, tb, eps_x, eps_t, w);
      opt.step(params);
      const double f = static_cast<double>(bsize) / static_cast<double>(n);
      epoch_mean.total += f * parts.total;
      epoch_mean.recon_img += f * parts.recon_img;
      epoch_mean.recon_aux += f * parts.recon_aux;
      epoch_mean.kl_img += f * parts.kl_img;
      epoch_mean.kl_aux += f * parts.kl_aux;
      epoch_mean.cross_img += f * parts.cross_img;
      epoch_mean.cross_aux += f * parts.cross_aux;
      epoch_mean.dist_align += f * parts.dist_align;
    }
    result.history.push_back(epoch_mean);
  }
  return result;
}

LabeledLatents sample_latents(const VaeParams& aux_vae, const Mat& aux_classes, int n_per_class,
                              std::uint64_t seed) {
  if (n_per_class < 1) throw ConfigError("sample_latents: n_per_class must be >= 1");
  const EncodeResult enc = vae_encode(aux_vae, aux_classes);
  const Mat sigma = (0.5 * enc.logvar.array()).exp();
  Rng rng = make_rng(derive_seed(seed, 0x5a17));
  std::normal_distribution<double> normal(0.0, 1.0);

  LabeledLatents out;
  const Eigen::Index k = aux_classes.rows();
  const int latent = aux_vae.latent_dim();
  out.z.resize(static_cast<Eigen::Index>(k) * n_per_class, latent);
  out.labels.reserve(static_cast<std::size_t>(k) * n_per_class);
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < k; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++row) {
      for (int j = 0; j < latent; ++j)
        out.z(row, j) = enc.mu(c, j) + normal(rng) * sigma(c, j);
      out.labels.push_back(static_cast<int>(c));
    }
  }
  return out;
}

double classifier_loss_and_grad(LatentClassifier& clf, const Mat& z,
                                const std::vector<int>& labels) {
  clf.W.zero_grad();
  clf.b.zero_grad();
  const Eigen::Index batch = z.rows();
  Mat logits = z * clf.W.value.transpose();
  logits.rowwise() += clf.b.value.col(0).transpose();

  double loss = 0.0;
  Mat d_logits(batch, clf.n_classes());
  for (Eigen::Index r = 0; r < batch; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= clf.n_classes()) throw DataError("classifier: label out of range");
    const double mx = logits.row(r).maxCoeff();
    const Eigen::ArrayXd ex = (logits.row(r).array() - mx).exp();
    const double denom = ex.sum();
    loss += -(logits(r, y) - mx - std::log(denom));
    d_logits.row(r) = (ex / denom).matrix().transpose();
    d_logits(r, y) -= 1.0;
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);
  d_logits *= inv_batch;
  clf.W.grad = d_logits.transpose() * z;
  clf.b.grad = d_logits.colwise().sum().transpose();
  return loss * inv_batch;
}

double classifier_loss_only(const LatentClassifier& clf, const Mat& z,
                            const std::vector<int>& labels) {
  Mat logits = z * clf.W.value.transpose();
  logits.rowwise() += clf.b.value.col(0).transpose();
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    const double mx = logits.row(r).maxCoeff();
    const double denom = (logits.row(r).array() - mx).exp().sum();
    loss += -(logits(r, y) - mx - std::log(denom));
  }
  return loss / static_cast<double>(z.rows());
}

LatentClassifier train_latent_classifier(const LabeledLatents& data, int n_classes,
                                         const ClassifierConfig& config, std::uint64_t seed) {
  if (data.z.rows() == 0) throw DataError("train_latent_classifier: no latents");
  std::vector<int> count(static_cast<std::size_t>(n_classes), 0);
  for (int y : data.labels) {
    if (y < 0 || y >= n_classes) throw DataError("train_latent_classifier: label out of range");
    ++count[static_cast<std::size_t>(y)];
  }
  for (int c = 0; c < n_classes; ++c) {
    if (count[static_cast<std::size_t>(c)] == 0)
      throw DataError("train_latent_classifier: class " + std::to_string(c) + " has no samples");
  }

  Rng init_rng = make_rng(derive_seed(seed, 0xC1f));
  LatentClassifier clf;
  clf.W = init_linear("clf.W", n_classes, static_cast<int>(data.z.cols()), init_rng);
  clf.b = init_bias("clf.b", n_classes);

  AdamHyper hyper;
  hyper.lr = config.learning_rate;
  std::vector<ParamTensor*> params = {&clf.W, &clf.b};
  AdamOptimizer opt(hyper, params);

  const Eigen::Index n = data.z.rows();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng = make_rng(derive_seed(derive_seed(seed, 0xC1f), epoch));
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index bsize = std::min<Eigen::Index>(config.batch_size, n - start);
      Mat zb(bsize, data.z.cols());
      std::vector<int> yb(static_cast<std::size_t>(bsize));
      for (Eigen::Index i = 0; i < bsize; ++i) {
        const Eigen::Index src = perm[static_cast<std::size_t>(start + i)];
        zb.row(i) = data.z.row(src);
        yb[static_cast<std::size_t>(i)] = data.labels[static_cast<std::size_t>(src)];
      }
      classifier_loss_and_grad(clf, zb, yb);
      opt.step(params);
    }
  }
  return clf;
}

std::vector<Eigen::Index> classify_topk(const VaeParams& img_vae, const LatentClassifier& clf,
                                        const Vec& image, int k) {
  Mat img(1, image.size());
  img.row(0) = image.transpose();
  return classify_topk_batch(img_vae, clf, img, k).front();
}

std::vector<std::vector<Eigen::Index>> classify_topk_batch(const VaeParams& img_vae,
                                                           const LatentClassifier& clf,
                                                           const Mat& images, int k) {
  if (k < 1 || k > clf.n_classes())
    throw DataError("classify: k=" + std::to_string(k) + " out of range for " +
                    std::to_string(clf.n_classes()) + " classes");
  const EncodeResult enc = vae_encode(img_vae, images);  // mu only at test time
  Mat logits = enc.mu * clf.W.value.transpose();
  logits.rowwise() += clf.b.value.col(0).transpose();

  std::vector<std::vector<Eigen::Index>> out;
  out.reserve(static_cast<std::size_t>(images.rows()));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(clf.n_classes()));
  for (Eigen::Index r = 0; r < images.rows(); ++r) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
      if (logits(r, a) != logits(r, c)) return logits(r, a) > logits(r, c);
      return a < c;
    });
    out.emplace_back(order.begin(), order.begin() + k);
  }
  return out;
}

namespace {

void push_vae_tensors(Checkpoint& ckpt, const VaeParams& vae) {
  auto& self = const_cast<VaeParams&>(vae);
  for (ParamTensor* p : self.all()) ckpt.tensors.emplace_back(p->name, p->value);
}

Affine load_affine(const Checkpoint& ckpt, const std::string& w_name, const std::string& b_name) {
  Affine l;
  l.W = ParamTensor(w_name, ckpt.tensor(w_name).rows(), ckpt.tensor(w_name).cols());
  l.W.value = ckpt.tensor(w_name);
  l.b = ParamTensor(b_name, ckpt.tensor(b_name).rows(), 1);
  l.b.value = ckpt.tensor(b_name);
  return l;
}

VaeParams load_vae(const Checkpoint& ckpt, const std::string& prefix, std::size_t n_enc,
                   std::size_t n_dec) {
  VaeParams vae;
  for (std::size_t i = 0; i < n_enc; ++i) {
    vae.encoder.push_back(load_affine(ckpt, prefix + ".enc" + std::to_string(i) + ".W",
                                      prefix + ".enc" + std::to_string(i) + ".b"));
  }
  vae.mu_head = load_affine(ckpt, prefix + ".mu.W", prefix + ".mu.b");
  vae.logvar_head = load_affine(ckpt, prefix + ".logvar.W", prefix + ".logvar.b");
  for (std::size_t i = 0; i <= n_dec; ++i) {
    vae.decoder.push_back(load_affine(ckpt, prefix + ".dec" + std::to_string(i) + ".W",
                                      prefix + ".dec" + std::to_string(i) + ".b"));
  }
  return vae;
}

}  // namespace

void save_cada_checkpoint(const std::string& path, const VaeParams& img_vae,
                          const VaeParams& aux_vae, const LatentClassifier* clf,
                          const CadaVaeConfig& config) {
  Checkpoint ckpt;
  ckpt.header = json{{"model", "cada_vae"},
                     {"config", config.to_json()},
                     {"has_classifier", clf != nullptr}};
  push_vae_tensors(ckpt, img_vae);
  push_vae_tensors(ckpt, aux_vae);
  if (clf != nullptr) {
    ckpt.tensors.emplace_back("clf.W", clf->W.value);
    ckpt.tensors.emplace_back("clf.b", clf->b.value);
  }
  write_checkpoint(path, ckpt);
}

CadaCheckpoint load_cada_checkpoint(const std::string& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.header.value("model", "") != "cada_vae")
    throw FormatError(path + ": not a cada_vae checkpoint");
  CadaCheckpoint out;
  out.config = CadaVaeConfig::from_json(ckpt.header.at("config"));
  out.img_vae = load_vae(ckpt, "img", out.config.enc_img_hidden.size(),
                         out.config.dec_img_hidden.size());
  out.aux_vae = load_vae(ckpt, "aux", out.config.enc_aux_hidden.size(),
                         out.config.dec_aux_hidden.size());
  out.has_classifier = ckpt.header.value("has_classifier", false);
  if (out.has_classifier) {
    out.classifier.W = ParamTensor("clf.W", ckpt.tensor("clf.W").rows(),
                                   ckpt.tensor("clf.W").cols());
    out.classifier.W.value = ckpt.tensor("clf.W");
    out.classifier.b = ParamTensor("clf.b", ckpt.tensor("clf.b").rows(), 1);
    out.classifier.b.value = ckpt.tensor("clf.b");
  }
  return out;
}

}  // namespace zslforge
