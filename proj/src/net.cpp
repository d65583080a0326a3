#include "peq/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "peq/errors.hpp"

namespace peq::net {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Linear init_linear(int out, int in, Rng& rng) {
  Linear l;
  l.w.resize(out, in);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) l.w(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
  l.b = Eigen::VectorXd::Zero(out);
  return l;
}

std::vector<Linear> init_head(int in, const ModelDims& d, Rng& rng) {
  std::vector<Linear> head;
  int width = in;
  for (int i = 0; i < d.layers; ++i) {
    head.push_back(init_linear(d.hidden, width, rng));
    width = d.hidden;
  }
  head.push_back(init_linear(1, width, rng));
  return head;
}

// hidden state for one trajectory up to step t, eval mode
Eigen::VectorXd encode_one(const ModelParams& p, const Trajectory& tr, int t) {
  const int d_in = static_cast<int>(tr.covariates.cols()) + 1;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(p.dims.hidden);
  Eigen::VectorXd x(d_in);
  for (int s = 1; s <= t; ++s) {
    x.head(d_in - 1) = tr.covariates.row(s - 1).transpose();
    x(d_in - 1) = (s == 1) ? 0.0 : static_cast<double>(tr.actions[static_cast<std::size_t>(s - 2)]);
    h = (p.enc.w.leftCols(d_in) * x + p.enc.w.rightCols(p.dims.hidden) * h + p.enc.b)
            .array()
            .tanh();
  }
  return h;
}

double head_eval(const std::vector<Linear>& head, Eigen::VectorXd z) {
  for (std::size_t i = 0; i + 1 < head.size(); ++i)
    z = (head[i].w * z + head[i].b).array().tanh();
  return (head.back().w * z + head.back().b)(0);
}

}  // namespace

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  if (dims.d_l < 1 || dims.rho_dim < 1 || dims.hidden < 1 || dims.tail_hidden < 1 ||
      dims.layers < 1)
    throw ConfigError("model dimensions must be positive");
  if (dims.dropout < 0.0 || dims.dropout >= 1.0)
    throw ConfigError("dropout must lie in [0, 1)");
  Rng rng(seed);
  ModelParams p;
  p.dims = dims;
  p.enc = init_linear(dims.hidden, dims.d_l + 1 + dims.hidden, rng);
  p.tail = init_linear(dims.tail_hidden, dims.rho_dim + dims.tail_hidden, rng);
  p.q_head = init_head(dims.hidden + 1 + dims.tail_hidden, dims, rng);
  p.g_head = init_head(dims.hidden, dims, rng);
  return p;
}

Gradients zero_like(const ModelParams& p) {
  Gradients g = p;
  visit_tensors(g, [](const std::string&, auto& t) { t.setZero(); });
  return g;
}

EncoderCache encode_history(const ModelParams& p, const Dataset& ds,
                            const std::vector<int>& rows) {
  const int b = static_cast<int>(rows.size());
  const int d_in = ds.d_l + 1;
  EncoderCache c;
  c.x.resize(static_cast<std::size_t>(ds.tau) + 1);
  c.h.resize(static_cast<std::size_t>(ds.tau) + 1);
  c.h[0] = Eigen::MatrixXd::Zero(b, p.dims.hidden);
  for (int t = 1; t <= ds.tau; ++t) {
    Eigen::MatrixXd x(b, d_in);
    for (int i = 0; i < b; ++i) {
      const Trajectory& tr = ds.trajectories[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
      x.block(i, 0, 1, ds.d_l) = tr.covariates.row(t - 1);
      x(i, d_in - 1) =
          (t == 1) ? 0.0 : static_cast<double>(tr.actions[static_cast<std::size_t>(t - 2)]);
    }
    Eigen::MatrixXd pre = x * p.enc.w.leftCols(d_in).transpose() +
                          c.h[static_cast<std::size_t>(t - 1)] * p.enc.w.rightCols(p.dims.hidden).transpose();
    pre.rowwise() += p.enc.b.transpose();
    c.h[static_cast<std::size_t>(t)] = pre.array().tanh();
    c.x[static_cast<std::size_t>(t)] = std::move(x);
  }
  return c;
}

void encoder_backward(const ModelParams& p, const EncoderCache& c,
                      std::vector<Eigen::MatrixXd>& d_h, Linear& grad) {
  const int tau = static_cast<int>(c.x.size()) - 1;
  const int d_in = static_cast<int>(c.x[1].cols());
  for (int t = tau; t >= 1; --t) {
    const Eigen::MatrixXd& h = c.h[static_cast<std::size_t>(t)];
    const Eigen::MatrixXd d_pre =
        d_h[static_cast<std::size_t>(t)].cwiseProduct((1.0 - h.array().square()).matrix());
    grad.w.leftCols(d_in) += d_pre.transpose() * c.x[static_cast<std::size_t>(t)];
    grad.w.rightCols(p.dims.hidden) += d_pre.transpose() * c.h[static_cast<std::size_t>(t - 1)];
    grad.b += d_pre.colwise().sum().transpose();
    if (t > 1)
      d_h[static_cast<std::size_t>(t - 1)] += d_pre * p.enc.w.rightCols(p.dims.hidden);
  }
}

TailCache encode_tail_all(const ModelParams& p, const Eigen::MatrixXd& rho) {
  if (rho.cols() != p.dims.rho_dim)
    throw ShapeError("policy embedding rows do not match the tail encoder input width");
  const int tau = static_cast<int>(rho.rows());
  TailCache c;
  c.rho = rho;
  c.e.resize(static_cast<std::size_t>(tau) + 2);
  c.e[static_cast<std::size_t>(tau) + 1] = Eigen::VectorXd::Zero(p.dims.tail_hidden);
  for (int s = tau; s >= 1; --s) {
    c.e[static_cast<std::size_t>(s)] =
        (p.tail.w.leftCols(p.dims.rho_dim) * rho.row(s - 1).transpose() +
         p.tail.w.rightCols(p.dims.tail_hidden) * c.e[static_cast<std::size_t>(s + 1)] + p.tail.b)
            .array()
            .tanh();
  }
  return c;
}

void tail_backward(const ModelParams& p, const TailCache& c,
                   std::vector<Eigen::VectorXd>& d_e, Linear& grad) {
  const int tau = static_cast<int>(c.rho.rows());
  // e_s feeds e_{s-1}, so gradients propagate toward larger s
  for (int s = 1; s <= tau; ++s) {
    const Eigen::VectorXd& e = c.e[static_cast<std::size_t>(s)];
    if (d_e[static_cast<std::size_t>(s)].size() == 0) continue;
    const Eigen::VectorXd d_pre =
        d_e[static_cast<std::size_t>(s)].cwiseProduct((1.0 - e.array().square()).matrix());
    grad.w.leftCols(p.dims.rho_dim) += d_pre * c.rho.row(s - 1);
    grad.w.rightCols(p.dims.tail_hidden) +=
        d_pre * c.e[static_cast<std::size_t>(s + 1)].transpose();
    grad.b += d_pre;
    if (s < tau) {
      Eigen::VectorXd chained = p.tail.w.rightCols(p.dims.tail_hidden).transpose() * d_pre;
      if (d_e[static_cast<std::size_t>(s + 1)].size() == 0)
        d_e[static_cast<std::size_t>(s + 1)] = std::move(chained);
      else
        d_e[static_cast<std::size_t>(s + 1)] += chained;
    }
  }
}

Eigen::VectorXd encode_tail(const ModelParams& p, const Eigen::MatrixXd& rho_tail) {
  if (rho_tail.rows() == 0) return Eigen::VectorXd::Zero(p.dims.tail_hidden);
  return encode_tail_all(p, rho_tail).e[1];
}

Eigen::VectorXd head_forward(const std::vector<Linear>& head, const Eigen::MatrixXd& input,
                             double dropout, Rng* rng, HeadCache* cache) {
  Eigen::MatrixXd z = input;
  Eigen::MatrixXd mask;
  bool masked = false;
  if (dropout > 0.0 && rng != nullptr) {
    const double keep = 1.0 - dropout;
    mask.resize(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r)
      for (Eigen::Index c = 0; c < z.cols(); ++c)
        mask(r, c) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    z = z.cwiseProduct(mask);
    masked = true;
  }
  if (cache) {
    cache->act.clear();
    cache->act.push_back(z);
    cache->mask = mask;
    cache->masked = masked;
  }
  for (std::size_t i = 0; i + 1 < head.size(); ++i) {
    Eigen::MatrixXd pre = z * head[i].w.transpose();
    pre.rowwise() += head[i].b.transpose();
    z = pre.array().tanh();
    if (cache) cache->act.push_back(z);
  }
  Eigen::VectorXd out = z * head.back().w.transpose().col(0);
  out.array() += head.back().b(0);
  return out;
}

void head_backward(const std::vector<Linear>& head, const HeadCache& cache,
                   const Eigen::VectorXd& d_out, std::vector<Linear>& grad,
                   Eigen::MatrixXd& d_input) {
  const std::size_t last = head.size() - 1;
  grad[last].w.row(0) += d_out.transpose() * cache.act[last];
  grad[last].b(0) += d_out.sum();
  Eigen::MatrixXd d_act = d_out * head[last].w.row(0);
  for (std::size_t i = last; i-- > 0;) {
    const Eigen::MatrixXd& a = cache.act[i + 1];
    const Eigen::MatrixXd d_pre = d_act.cwiseProduct((1.0 - a.array().square()).matrix());
    grad[i].w += d_pre.transpose() * cache.act[i];
    grad[i].b += d_pre.colwise().sum().transpose();
    d_act = d_pre * head[i].w;
  }
  if (cache.masked) d_act = d_act.cwiseProduct(cache.mask);
  d_input = std::move(d_act);
}

Eigen::MatrixXd q_input(const Eigen::MatrixXd& h_t, const Eigen::VectorXd& a_t,
                        const Eigen::VectorXd& e_next) {
  const Eigen::Index b = h_t.rows();
  Eigen::MatrixXd z(b, h_t.cols() + 1 + e_next.size());
  z.leftCols(h_t.cols()) = h_t;
  z.col(h_t.cols()) = a_t;
  z.rightCols(e_next.size()) = e_next.transpose().replicate(b, 1);
  return z;
}

double forward_q(const ModelParams& p, const Trajectory& tr, int t, int a_t,
                 const Eigen::MatrixXd& rho_tail) {
  const int tau = static_cast<int>(tr.covariates.rows());
  if (t < 1 || t > tau) throw std::out_of_range("step outside 1..tau");
  if (a_t != 0 && a_t != 1) throw std::invalid_argument("action must be 0 or 1");
  const Eigen::VectorXd h = encode_one(p, tr, t);
  const Eigen::VectorXd e = encode_tail(p, rho_tail);
  Eigen::VectorXd z(h.size() + 1 + e.size());
  z << h, static_cast<double>(a_t), e;
  return head_eval(p.q_head, z);
}

double forward_g(const ModelParams& p, const Trajectory& tr, int t) {
  const int tau = static_cast<int>(tr.covariates.rows());
  if (t < 1 || t > tau) throw std::out_of_range("step outside 1..tau");
  return sigmoid(head_eval(p.g_head, encode_one(p, tr, t)));
}

void polyak_update(ModelParams& target, const ModelParams& live, double beta) {
  bool ok = target.q_head.size() == live.q_head.size() &&
            target.g_head.size() == live.g_head.size();
  if (ok)
    visit_tensor_pairs(target, live, [&ok](auto& t, const auto& l) {
      if (t.rows() != l.rows() || t.cols() != l.cols()) ok = false;
    });
  if (!ok) throw ShapeError("target and live parameters have different shapes");
  visit_tensor_pairs(target, live,
                     [beta](auto& t, const auto& l) { t = beta * l + (1.0 - beta) * t; });
}

void save_params(const std::string& path, const ModelParams& p) {
  nlohmann::json j;
  j["format"] = "peqnet-params-v1";
  j["d_l"] = p.dims.d_l;
  j["rho_dim"] = p.dims.rho_dim;
  j["hidden"] = p.dims.hidden;
  j["tail_hidden"] = p.dims.tail_hidden;
  j["layers"] = p.dims.layers;
  j["dropout"] = p.dims.dropout;
  nlohmann::json tensors = nlohmann::json::object();
  visit_tensors(p, [&tensors](const std::string& name, auto& t) {
    nlohmann::json entry;
    entry["rows"] = static_cast<long long>(t.rows());
    entry["cols"] = static_cast<long long>(t.cols());
    std::vector<double> data(t.data(), t.data() + t.size());
    entry["data"] = data;
    tensors[name] = std::move(entry);
  });
  j["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump() << "\n";
  if (!out) throw IoError("write failed for " + path);
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("invalid checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != "peqnet-params-v1")
    throw IoError("unrecognized checkpoint format in " + path);
  ModelDims dims;
  dims.d_l = j.at("d_l").get<int>();
  dims.rho_dim = j.at("rho_dim").get<int>();
  dims.hidden = j.at("hidden").get<int>();
  dims.tail_hidden = j.at("tail_hidden").get<int>();
  dims.layers = j.at("layers").get<int>();
  dims.dropout = j.at("dropout").get<double>();
  ModelParams p = init_params(dims, 0);
  const nlohmann::json& tensors = j.at("tensors");
  visit_tensors(p, [&tensors, &path](const std::string& name, auto& t) {
    if (!tensors.contains(name)) throw IoError("checkpoint " + path + " missing " + name);
    const nlohmann::json& entry = tensors.at(name);
    const auto rows = entry.at("rows").get<long long>();
    const auto cols = entry.at("cols").get<long long>();
    if (rows != t.rows() || cols != t.cols())
      throw IoError("checkpoint tensor " + name + " has wrong shape");
    const auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<long long>(data.size()) != t.size())
      throw IoError("checkpoint tensor " + name + " has wrong length");
    std::copy(data.begin(), data.end(), t.data());
  });
  return p;
}

}  // namespace peq::net
