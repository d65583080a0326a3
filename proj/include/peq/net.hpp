#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "peq/rng.hpp"
#include "peq/types.hpp"

namespace peq::net {

struct Linear {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

struct ModelDims {
  int d_l = 0;
  int rho_dim = 2;
  int hidden = 16;
  int tail_hidden = 8;
  int layers = 2;
  double dropout = 0.0;
};

// History encoder h_t = tanh(W_h [L_t; A_{t-1}; h_{t-1}] + b_h), tail encoder
// e_s = tanh(W_e [rho_s; e_{s+1}] + b_e) run backward in s, and two MLP heads:
// Q on [h_t; A_t; e_{t+1}] with a linear scalar output, G on [h_t] giving a logit.
struct ModelParams {
  ModelDims dims;
  Linear enc;
  Linear tail;
  std::vector<Linear> q_head;
  std::vector<Linear> g_head;
};

using Gradients = ModelParams;

// Applies f(name, tensor) to every parameter tensor in a fixed order.
template <class Params, class F>
void visit_tensors(Params& p, F&& f) {
  f("enc.w", p.enc.w);
  f("enc.b", p.enc.b);
  f("tail.w", p.tail.w);
  f("tail.b", p.tail.b);
  for (std::size_t i = 0; i < p.q_head.size(); ++i) {
    f("q_head." + std::to_string(i) + ".w", p.q_head[i].w);
    f("q_head." + std::to_string(i) + ".b", p.q_head[i].b);
  }
  for (std::size_t i = 0; i < p.g_head.size(); ++i) {
    f("g_head." + std::to_string(i) + ".w", p.g_head[i].w);
    f("g_head." + std::to_string(i) + ".b", p.g_head[i].b);
  }
}

// Applies f(tensor_a, tensor_b) pairwise; shapes must match.
template <class A, class B, class F>
void visit_tensor_pairs(A& a, B& b, F&& f) {
  f(a.enc.w, b.enc.w);
  f(a.enc.b, b.enc.b);
  f(a.tail.w, b.tail.w);
  f(a.tail.b, b.tail.b);
  for (std::size_t i = 0; i < a.q_head.size(); ++i) {
    f(a.q_head[i].w, b.q_head[i].w);
    f(a.q_head[i].b, b.q_head[i].b);
  }
  for (std::size_t i = 0; i < a.g_head.size(); ++i) {
    f(a.g_head[i].w, b.g_head[i].w);
    f(a.g_head[i].b, b.g_head[i].b);
  }
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed);
Gradients zero_like(const ModelParams& p);

// Batched history encoding for the trajectories picked out by rows.
// x[t] holds the step-t inputs [L_t; A_{t-1}] and h[t] the hidden states, t = 1..tau;
// h[0] is the zero initial state.
struct EncoderCache {
  std::vector<Eigen::MatrixXd> x;
  std::vector<Eigen::MatrixXd> h;
};
EncoderCache encode_history(const ModelParams& p, const Dataset& ds,
                            const std::vector<int>& rows);

// Backpropagates d_h[t] (gradient of the loss in h_t, t = 1..tau) through the
// recurrence, accumulating into grad. d_h is consumed.
void encoder_backward(const ModelParams& p, const EncoderCache& c,
                      std::vector<Eigen::MatrixXd>& d_h, Linear& grad);

// Tail encodings for one policy: e[s] encodes rho_{s:tau}, s = 1..tau+1, with
// e[tau+1] = 0. The Q-head at step t reads e[t+1].
struct TailCache {
  Eigen::MatrixXd rho;
  std::vector<Eigen::VectorXd> e;
};
TailCache encode_tail_all(const ModelParams& p, const Eigen::MatrixXd& rho);

// d_e[s] is the loss gradient in e[s]; slots 2..tau carry head contributions.
// Accumulates into grad. d_e is consumed.
void tail_backward(const ModelParams& p, const TailCache& c,
                   std::vector<Eigen::VectorXd>& d_e, Linear& grad);

// Encoding of an explicit tail rho_{t+1}..rho_tau (rows in forward time order);
// zero rows give the zero vector, as does an empty tail.
Eigen::VectorXd encode_tail(const ModelParams& p, const Eigen::MatrixXd& rho_tail);

// MLP head pass over a batch. With dropout > 0 and rng set, an inverted-dropout
// mask is drawn for the input vector; cache records what backward needs.
struct HeadCache {
  std::vector<Eigen::MatrixXd> act;
  Eigen::MatrixXd mask;
  bool masked = false;
};
Eigen::VectorXd head_forward(const std::vector<Linear>& head, const Eigen::MatrixXd& input,
                             double dropout, Rng* rng, HeadCache* cache);
void head_backward(const std::vector<Linear>& head, const HeadCache& cache,
                   const Eigen::VectorXd& d_out, std::vector<Linear>& grad,
                   Eigen::MatrixXd& d_input);

// Assembles the Q-head input [h_t | a_t | e_{t+1}] with e broadcast across the batch.
Eigen::MatrixXd q_input(const Eigen::MatrixXd& h_t, const Eigen::VectorXd& a_t,
                        const Eigen::VectorXd& e_next);

// Single-trajectory evaluation passes (no dropout). rho_tail rows are
// rho_{t+1}..rho_tau; empty at t = tau.
double forward_q(const ModelParams& p, const Trajectory& tr, int t, int a_t,
                 const Eigen::MatrixXd& rho_tail);
double forward_g(const ModelParams& p, const Trajectory& tr, int t);

// target <- beta * live + (1 - beta) * target, elementwise
void polyak_update(ModelParams& target, const ModelParams& live, double beta);

void save_params(const std::string& path, const ModelParams& p);
ModelParams load_params(const std::string& path);

}  // namespace peq::net
