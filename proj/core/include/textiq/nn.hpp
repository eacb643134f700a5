#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "textiq/common.hpp"

namespace textiq::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

// A trainable tensor plus its accumulated gradient and Adam state.
template <typename S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  Mat<S> adam_m;
  Mat<S> adam_v;
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename S>
class ParamStore {
 public:
  Param<S>& add(const std::string& name, int rows, int cols) {
    params_.push_back(std::make_unique<Param<S>>());
    Param<S>& p = *params_.back();
    p.name = name;
    p.value = Mat<S>::Zero(rows, cols);
    p.zero_grad();
    p.adam_m = Mat<S>::Zero(rows, cols);
    p.adam_v = Mat<S>::Zero(rows, cols);
    return p;
  }

  std::vector<std::unique_ptr<Param<S>>>& all() { return params_; }
  const std::vector<std::unique_ptr<Param<S>>>& all() const { return params_; }

  size_t count_scalars() const {
    size_t n = 0;
    for (const auto& p : params_) n += static_cast<size_t>(p->value.size());
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p->zero_grad();
  }

  // Flat views used by serialization and by finite-difference probes.
  std::vector<double> flatten_values() const {
    std::vector<double> out;
    out.reserve(count_scalars());
    for (const auto& p : params_) {
      for (Eigen::Index i = 0; i < p->value.size(); ++i) {
        out.push_back(static_cast<double>(p->value.data()[i]));
      }
    }
    return out;
  }

  void unflatten_values(const std::vector<double>& flat) {
    require(flat.size() == count_scalars(), "parameter vector size mismatch");
    size_t k = 0;
    for (auto& p : params_) {
      for (Eigen::Index i = 0; i < p->value.size(); ++i) {
        p->value.data()[i] = static_cast<S>(flat[k++]);
      }
    }
  }

  std::vector<double> flatten_grads() const {
    std::vector<double> out;
    out.reserve(count_scalars());
    for (const auto& p : params_) {
      for (Eigen::Index i = 0; i < p->grad.size(); ++i) {
        out.push_back(static_cast<double>(p->grad.data()[i]));
      }
    }
    return out;
  }

 private:
  std::vector<std::unique_ptr<Param<S>>> params_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename S>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParamStore<S>& store) {
    ++t_;
    const S lr = static_cast<S>(config_.learning_rate);
    const S b1 = static_cast<S>(config_.beta1);
    const S b2 = static_cast<S>(config_.beta2);
    const S eps = static_cast<S>(config_.epsilon);
    const S bc1 = static_cast<S>(1.0 - std::pow(config_.beta1, t_));
    const S bc2 = static_cast<S>(1.0 - std::pow(config_.beta2, t_));
    for (auto& p : store.all()) {
      if (!p->trainable) continue;
      p->adam_m = b1 * p->adam_m + (S(1) - b1) * p->grad;
      p->adam_v = (b2 * p->adam_v.array() + (S(1) - b2) * p->grad.array().square()).matrix();
      p->value.array() -=
          lr * (p->adam_m.array() / bc1) / ((p->adam_v.array() / bc2).sqrt() + eps);
    }
  }

  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  AdamConfig config_;
  long t_ = 0;
};

// Spatial metadata for feature maps stored as [positions x channels] matrices
// with rows ordered y-major.
struct GridShape {
  int h = 0;
  int w = 0;
  int c = 0;

  int positions() const { return h * w; }
};

struct ConvSpec {
  GridShape in;
  int kernel = 3;
  int stride = 1;
  int pad = 0;
  int out_channels = 0;

  int out_h() const { return (in.h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in.w + 2 * pad - kernel) / stride + 1; }
  GridShape out() const { return GridShape{out_h(), out_w(), out_channels}; }
};

// Reverse-mode tape over Eigen matrices. Nodes are created in forward order;
// backward() replays the closures in reverse.
template <typename S>
class Tape {
 public:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    std::function<void()> backward;
    bool needs_grad = false;
  };
  using Ref = Node*;

  size_t size() const { return nodes_.size(); }

  Ref constant(Mat<S> v) { return make(std::move(v), false); }

  Ref leaf(Param<S>& p) {
    Ref n = make(p.value, p.trainable);
    if (p.trainable) {
      Param<S>* pp = &p;
      n->backward = [n, pp]() {
        if (n->grad.size() == 0) return;
        pp->grad += n->grad;
      };
    }
    return n;
  }

  static void accumulate(Ref n, const Mat<S>& g) {
    if (!n->needs_grad) return;
    if (n->grad.size() == 0) {
      n->grad = g;
    } else {
      n->grad += g;
    }
  }

  Ref matmul(Ref a, Ref b) {
    Ref n = make(a->value * b->value, a->needs_grad || b->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a, b]() {
        if (n->grad.size() == 0) return;
        if (a->needs_grad) accumulate(a, n->grad * b->value.transpose());
        if (b->needs_grad) accumulate(b, a->value.transpose() * n->grad);
      };
    }
    return n;
  }

  Ref add(Ref a, Ref b) {
    Ref n = make(a->value + b->value, a->needs_grad || b->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a, b]() {
        if (n->grad.size() == 0) return;
        accumulate(a, n->grad);
        accumulate(b, n->grad);
      };
    }
    return n;
  }

  // a[R x C] + bias[1 x C] applied to every row.
  Ref add_row_broadcast(Ref a, Ref bias) {
    Mat<S> v = a->value;
    v.rowwise() += bias->value.row(0);
    Ref n = make(std::move(v), a->needs_grad || bias->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a, bias]() {
        if (n->grad.size() == 0) return;
        accumulate(a, n->grad);
        if (bias->needs_grad) accumulate(bias, n->grad.colwise().sum());
      };
    }
    return n;
  }

  Ref mul(Ref a, Ref b) {
    Ref n = make(a->value.cwiseProduct(b->value), a->needs_grad || b->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a, b]() {
        if (n->grad.size() == 0) return;
        if (a->needs_grad) accumulate(a, n->grad.cwiseProduct(b->value));
        if (b->needs_grad) accumulate(b, n->grad.cwiseProduct(a->value));
      };
    }
    return n;
  }

  Ref scale(Ref a, S k) {
    Ref n = make(a->value * k, a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a, k]() {
        if (n->grad.size() == 0) return;
        accumulate(a, n->grad * k);
      };
    }
    return n;
  }

  Ref transpose(Ref a) {
    Ref n = make(a->value.transpose(), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a]() {
        if (n->grad.size() == 0) return;
        accumulate(a, n->grad.transpose());
      };
    }
    return n;
  }

  Ref slice_rows(Ref a, int start, int count) {
    Ref n = make(a->value.middleRows(start, count), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a, start, count]() {
        if (n->grad.size() == 0) return;
        if (a->grad.size() == 0) a->grad = Mat<S>::Zero(a->value.rows(), a->value.cols());
        a->grad.middleRows(start, count) += n->grad;
      };
    }
    return n;
  }

  Ref slice_cols(Ref a, int start, int count) {
    Ref n = make(a->value.middleCols(start, count), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a, start, count]() {
        if (n->grad.size() == 0) return;
        if (a->grad.size() == 0) a->grad = Mat<S>::Zero(a->value.rows(), a->value.cols());
        a->grad.middleCols(start, count) += n->grad;
      };
    }
    return n;
  }

  Ref concat_rows(const std::vector<Ref>& parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    Eigen::Index rows = 0;
    bool needs = false;
    for (Ref p : parts) {
      rows += p->value.rows();
      needs = needs || p->needs_grad;
    }
    Mat<S> v(rows, parts[0]->value.cols());
    Eigen::Index at = 0;
    for (Ref p : parts) {
      v.middleRows(at, p->value.rows()) = p->value;
      at += p->value.rows();
    }
    Ref n = make(std::move(v), needs);
    if (needs) {
      std::vector<Ref> inputs = parts;
      n->backward = [n, inputs]() {
        if (n->grad.size() == 0) return;
        Eigen::Index at = 0;
        for (Ref p : inputs) {
          accumulate(p, n->grad.middleRows(at, p->value.rows()));
          at += p->value.rows();
        }
      };
    }
    return n;
  }

  Ref concat_cols(const std::vector<Ref>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    Eigen::Index cols = 0;
    bool needs = false;
    for (Ref p : parts) {
      cols += p->value.cols();
      needs = needs || p->needs_grad;
    }
    Mat<S> v(parts[0]->value.rows(), cols);
    Eigen::Index at = 0;
    for (Ref p : parts) {
      v.middleCols(at, p->value.cols()) = p->value;
      at += p->value.cols();
    }
    Ref n = make(std::move(v), needs);
    if (needs) {
      std::vector<Ref> inputs = parts;
      n->backward = [n, inputs]() {
        if (n->grad.size() == 0) return;
        Eigen::Index at = 0;
        for (Ref p : inputs) {
          accumulate(p, n->grad.middleCols(at, p->value.cols()));
          at += p->value.cols();
        }
      };
    }
    return n;
  }

  Ref sigmoid(Ref a) {
    Mat<S> v = (S(1) / (S(1) + (-a->value.array()).exp())).matrix();
    Ref n = make(std::move(v), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a]() {
        if (n->grad.size() == 0) return;
        accumulate(
            a, (n->grad.array() * n->value.array() * (S(1) - n->value.array())).matrix());
      };
    }
    return n;
  }

  Ref tanh(Ref a) {
    Mat<S> v = a->value.array().tanh().matrix();
    Ref n = make(std::move(v), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a]() {
        if (n->grad.size() == 0) return;
        accumulate(a, (n->grad.array() * (S(1) - n->value.array().square())).matrix());
      };
    }
    return n;
  }

  // Smooth GELU (tanh form) so loss gradients stay finite-difference clean.
  Ref gelu(Ref a) {
    const S c = static_cast<S>(std::sqrt(2.0 / M_PI));
    const S k = static_cast<S>(0.044715);
    auto x = a->value.array();
    auto inner = (c * (x + k * x.cube())).tanh();
    Mat<S> v = (S(0.5) * x * (S(1) + inner)).matrix();
    Ref n = make(std::move(v), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a, c, k]() {
        if (n->grad.size() == 0) return;
        auto x = a->value.array();
        auto u = c * (x + k * x.cube());
        auto t = u.tanh();
        auto du = c * (S(1) + S(3) * k * x.square());
        auto d = S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t.square()) * du;
        accumulate(a, (n->grad.array() * d).matrix());
      };
    }
    return n;
  }

  Ref expm(Ref a) {
    Mat<S> v = a->value.array().exp().matrix();
    Ref n = make(std::move(v), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a]() {
        if (n->grad.size() == 0) return;
        accumulate(a, n->grad.cwiseProduct(n->value));
      };
    }
    return n;
  }

  Ref softmax_rows(Ref a) {
    Mat<S> v = a->value;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      const S mx = v.row(r).maxCoeff();
      v.row(r) = (v.row(r).array() - mx).exp();
      v.row(r) /= v.row(r).sum();
    }
    Ref n = make(std::move(v), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a]() {
        if (n->grad.size() == 0) return;
        Mat<S> g(n->value.rows(), n->value.cols());
        for (Eigen::Index r = 0; r < n->value.rows(); ++r) {
          const S dot = n->grad.row(r).cwiseProduct(n->value.row(r)).sum();
          g.row(r) = (n->value.row(r).array() * (n->grad.row(r).array() - dot)).matrix();
        }
        accumulate(a, g);
      };
    }
    return n;
  }

  // Per-row layer normalization with learned gain/offset (1 x C each).
  Ref layernorm_rows(Ref a, Ref gamma, Ref beta, S eps = S(1e-5)) {
    const Eigen::Index rows = a->value.rows();
    const Eigen::Index cols = a->value.cols();
    Mat<S> xhat(rows, cols);
    Mat<S> inv_std(rows, 1);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const S mean = a->value.row(r).mean();
      const S var = (a->value.row(r).array() - mean).square().mean();
      inv_std(r, 0) = S(1) / std::sqrt(var + eps);
      xhat.row(r) = (a->value.row(r).array() - mean) * inv_std(r, 0);
    }
    Mat<S> v = xhat;
    for (Eigen::Index r = 0; r < rows; ++r) {
      v.row(r) = v.row(r).cwiseProduct(gamma->value.row(0)) + beta->value.row(0);
    }
    Ref n = make(std::move(v), a->needs_grad || gamma->needs_grad || beta->needs_grad);
    if (n->needs_grad) {
      // Keep normalized activations alive for the backward pass.
      auto xhat_p = std::make_shared<Mat<S>>(std::move(xhat));
      auto inv_p = std::make_shared<Mat<S>>(std::move(inv_std));
      n->backward = [n, a, gamma, beta, xhat_p, inv_p]() {
        if (n->grad.size() == 0) return;
        const Eigen::Index rows = n->value.rows();
        const Eigen::Index cols = n->value.cols();
        if (gamma->needs_grad) {
          accumulate(gamma, (n->grad.array() * xhat_p->array()).colwise().sum().matrix());
        }
        if (beta->needs_grad) accumulate(beta, n->grad.colwise().sum());
        if (a->needs_grad) {
          Mat<S> g(rows, cols);
          for (Eigen::Index r = 0; r < rows; ++r) {
            const Mat<S> dy = n->grad.row(r).cwiseProduct(gamma->value.row(0));
            const S mean_dy = dy.mean();
            const S mean_dy_xhat = dy.cwiseProduct(xhat_p->row(r)).mean();
            g.row(r) = ((dy.array() - mean_dy - xhat_p->row(r).array() * mean_dy_xhat) *
                        (*inv_p)(r, 0))
                           .matrix();
          }
          accumulate(a, g);
        }
      };
    }
    return n;
  }

  Ref mean_rows(Ref a) {
    Mat<S> v = a->value.colwise().mean();
    Ref n = make(std::move(v), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a]() {
        if (n->grad.size() == 0) return;
        const S inv = S(1) / static_cast<S>(a->value.rows());
        accumulate(a, (n->grad * inv).replicate(a->value.rows(), 1));
      };
    }
    return n;
  }

  Ref mean_all(Ref a) {
    Mat<S> v(1, 1);
    v(0, 0) = a->value.mean();
    Ref n = make(std::move(v), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a]() {
        if (n->grad.size() == 0) return;
        const S g = n->grad(0, 0) / static_cast<S>(a->value.size());
        accumulate(a, Mat<S>::Constant(a->value.rows(), a->value.cols(), g));
      };
    }
    return n;
  }

  Ref sum_all(Ref a) {
    Mat<S> v(1, 1);
    v(0, 0) = a->value.sum();
    Ref n = make(std::move(v), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a]() {
        if (n->grad.size() == 0) return;
        accumulate(a, Mat<S>::Constant(a->value.rows(), a->value.cols(), n->grad(0, 0)));
      };
    }
    return n;
  }

  // Patch extraction over a y-major [positions x channels] grid; output rows
  // are output positions, columns are (ky, kx, channel) flattened.
  Ref im2col(Ref a, const ConvSpec& spec) {
    const int oh = spec.out_h();
    const int ow = spec.out_w();
    const int patch = spec.kernel * spec.kernel * spec.in.c;
    Mat<S> v = Mat<S>::Zero(static_cast<Eigen::Index>(oh) * ow, patch);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const Eigen::Index row = static_cast<Eigen::Index>(oy) * ow + ox;
        int col = 0;
        for (int ky = 0; ky < spec.kernel; ++ky) {
          for (int kx = 0; kx < spec.kernel; ++kx) {
            const int iy = oy * spec.stride + ky - spec.pad;
            const int ix = ox * spec.stride + kx - spec.pad;
            if (iy >= 0 && iy < spec.in.h && ix >= 0 && ix < spec.in.w) {
              const Eigen::Index in_row = static_cast<Eigen::Index>(iy) * spec.in.w + ix;
              v.block(row, col, 1, spec.in.c) = a->value.row(in_row);
            }
            col += spec.in.c;
          }
        }
      }
    }
    Ref n = make(std::move(v), a->needs_grad);
    if (n->needs_grad) {
      ConvSpec s = spec;
      n->backward = [n, a, s]() {
        if (n->grad.size() == 0) return;
        if (a->grad.size() == 0) a->grad = Mat<S>::Zero(a->value.rows(), a->value.cols());
        const int oh = s.out_h();
        const int ow = s.out_w();
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const Eigen::Index row = static_cast<Eigen::Index>(oy) * ow + ox;
            int col = 0;
            for (int ky = 0; ky < s.kernel; ++ky) {
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int iy = oy * s.stride + ky - s.pad;
                const int ix = ox * s.stride + kx - s.pad;
                if (iy >= 0 && iy < s.in.h && ix >= 0 && ix < s.in.w) {
                  const Eigen::Index in_row = static_cast<Eigen::Index>(iy) * s.in.w + ix;
                  a->grad.row(in_row) += n->grad.block(row, col, 1, s.in.c);
                }
                col += s.in.c;
              }
            }
          }
        }
      };
    }
    return n;
  }

  // Nearest-neighbour 2x upsample of a y-major grid.
  Ref upsample2x(Ref a, int h, int w) {
    const int c = static_cast<int>(a->value.cols());
    Mat<S> v(static_cast<Eigen::Index>(h) * w * 4, c);
    for (int y = 0; y < 2 * h; ++y) {
      for (int x = 0; x < 2 * w; ++x) {
        v.row(static_cast<Eigen::Index>(y) * 2 * w + x) =
            a->value.row(static_cast<Eigen::Index>(y / 2) * w + x / 2);
      }
    }
    Ref n = make(std::move(v), a->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, a, h, w]() {
        if (n->grad.size() == 0) return;
        if (a->grad.size() == 0) a->grad = Mat<S>::Zero(a->value.rows(), a->value.cols());
        for (int y = 0; y < 2 * h; ++y) {
          for (int x = 0; x < 2 * w; ++x) {
            a->grad.row(static_cast<Eigen::Index>(y / 2) * w + x / 2) +=
                n->grad.row(static_cast<Eigen::Index>(y) * 2 * w + x);
          }
        }
      };
    }
    return n;
  }

  // Sum of w .* (a - target)^2, as a 1x1 node.
  Ref weighted_sq_error(Ref a, const Mat<S>& target, const Mat<S>& weight) {
    Mat<S> diff = a->value - target;
    Mat<S> v(1, 1);
    v(0, 0) = (weight.array() * diff.array().square()).sum();
    Ref n = make(std::move(v), a->needs_grad);
    if (n->needs_grad) {
      auto diff_p = std::make_shared<Mat<S>>(std::move(diff));
      auto weight_p = std::make_shared<Mat<S>>(weight);
      n->backward = [n, a, diff_p, weight_p]() {
        if (n->grad.size() == 0) return;
        accumulate(a,
                   (S(2) * n->grad(0, 0) * weight_p->array() * diff_p->array()).matrix());
      };
    }
    return n;
  }

  // Differentiable code-length proxy: sum of w .* 2*log2(1 + sqrt(z^2 + eps)),
  // matching the asymptotics of the Elias-gamma magnitude coder.
  Ref rate_bits(Ref z, const Mat<S>& weight, S eps = S(1e-6)) {
    auto mag = (z->value.array().square() + eps).sqrt();
    Mat<S> v(1, 1);
    const S log2e = static_cast<S>(1.4426950408889634);
    v(0, 0) = (weight.array() * S(2) * (S(1) + mag).log() * log2e).sum();
    Ref n = make(std::move(v), z->needs_grad);
    if (n->needs_grad) {
      auto weight_p = std::make_shared<Mat<S>>(weight);
      n->backward = [n, z, weight_p, eps, log2e]() {
        if (n->grad.size() == 0) return;
        auto mag = (z->value.array().square() + eps).sqrt();
        auto d = S(2) * log2e * z->value.array() / (mag * (S(1) + mag));
        accumulate(z, (n->grad(0, 0) * weight_p->array() * d).matrix());
      };
    }
    return n;
  }

  // L1 plus epsilon-insensitive regression loss against a fixed target; either
  // term can be switched off.
  Ref quality_loss(Ref pred, S ground_truth, S epsilon, bool use_l1 = true,
                   bool use_eps = true) {
    const S err = ground_truth - pred->value(0, 0);
    const S abs_err = std::abs(err);
    Mat<S> v(1, 1);
    v(0, 0) = (use_l1 ? abs_err : S(0)) +
              ((use_eps && abs_err >= epsilon) ? abs_err - epsilon : S(0));
    Ref n = make(std::move(v), pred->needs_grad);
    if (n->needs_grad) {
      n->backward = [n, pred, err, abs_err, epsilon, use_l1, use_eps]() {
        if (n->grad.size() == 0) return;
        const S sign = err > S(0) ? S(-1) : (err < S(0) ? S(1) : S(0));
        const S terms = (use_l1 ? S(1) : S(0)) +
                        ((use_eps && abs_err >= epsilon) ? S(1) : S(0));
        Mat<S> g(1, 1);
        g(0, 0) = n->grad(0, 0) * sign * terms;
        accumulate(pred, g);
      };
    }
    return n;
  }

  void backward(Ref root) {
    require(root->value.rows() == 1 && root->value.cols() == 1,
            "backward: root must be scalar");
    root->grad = Mat<S>::Ones(1, 1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->backward) it->backward();
    }
  }

 private:
  Ref make(Mat<S> v, bool needs_grad) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    return &n;
  }

  std::deque<Node> nodes_;
};

// Uniform Xavier-style initialization, deterministic via the shared Rng.
template <typename S>
void init_uniform(Param<S>& p, Rng& rng, double fan_in, double fan_out) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index i = 0; i < p.value.size(); ++i) {
    p.value.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
  }
}

}  // namespace textiq::nn
