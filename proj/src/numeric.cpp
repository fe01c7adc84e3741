#include "zslforge/numeric.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace zslforge {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string trim(const std::string& s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string lowercase(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

std::string collapse_whitespace(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // leading spaces dropped
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      in_space = true;
    } else {
      if (in_space && !out.empty()) out += ' ';
      in_space = false;
      out += static_cast<char>(c);
    }
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

ParamTensor init_linear(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw ConfigError("init_linear: dims must be >= 1 for " + name);
  ParamTensor p(name, rows, cols);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) p.value(i, j) = dist(rng);
  return p;
}

ParamTensor init_linear(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                        std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return init_linear(name, rows, cols, rng);
}

ParamTensor init_bias(const std::string& name, Eigen::Index len) {
  return ParamTensor(name, len, 1);
}

AdamOptimizer::AdamOptimizer(AdamHyper hyper, const std::vector<ParamTensor*>& params)
    : hyper_(hyper) {
  slots_.reserve(params.size());
  for (const ParamTensor* p : params) {
    Slot s;
    s.m = Mat::Zero(p->value.rows(), p->value.cols());
    s.v = Mat::Zero(p->value.rows(), p->value.cols());
    if (hyper_.amsgrad) s.vhat_max = Mat::Zero(p->value.rows(), p->value.cols());
    slots_.push_back(std::move(s));
  }
}

void AdamOptimizer::step(const std::vector<ParamTensor*>& params) {
  if (params.size() != slots_.size())
    throw DataError("optimizer_step: parameter list does not match optimizer state");
  ++t_;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamTensor& p = *params[i];
    if (!p.grad.allFinite())
      throw DataError("optimizer_step: non-finite gradient in parameter '" + p.name + "'");
    Slot& s = slots_[i];
    s.m = hyper_.beta1 * s.m + (1.0 - hyper_.beta1) * p.grad;
    s.v = hyper_.beta2 * s.v + (1.0 - hyper_.beta2) * p.grad.cwiseProduct(p.grad);
    Mat m_hat = s.m / bc1;
    Mat v_hat = s.v / bc2;
    if (hyper_.amsgrad) {
      s.vhat_max = s.vhat_max.cwiseMax(v_hat);
      v_hat = s.vhat_max;
    }
    p.value.array() -= hyper_.lr * m_hat.array() / (v_hat.array().sqrt() + hyper_.eps);
  }
}

WarmupSchedule::WarmupSchedule(double f, int start, int end)
    : factor(f), start_epoch(start), end_epoch(end) {
  if (factor < 0) throw ConfigError("warmup schedule: factor must be >= 0");
  if (end_epoch <= start_epoch) throw ConfigError("warmup schedule: end must be > start");
}

double WarmupSchedule::weight(int epoch) const {
  double t = static_cast<double>(epoch - start_epoch) /
             static_cast<double>(end_epoch - start_epoch);
  t = std::clamp(t, 0.0, 1.0);
  return factor * t;
}

std::vector<Mat> finite_diff_grad(const std::function<double()>& loss,
                                  const std::vector<ParamTensor*>& params, double eps) {
  std::vector<Mat> grads;
  grads.reserve(params.size());
  for (ParamTensor* p : params) {
    Mat g = Mat::Zero(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
        const double saved = p->value(i, j);
        p->value(i, j) = saved + eps;
        const double fp = loss();
        p->value(i, j) = saved - eps;
        const double fm = loss();
        p->value(i, j) = saved;
        g(i, j) = (fp - fm) / (2.0 * eps);
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace zslforge
