#include "mcpred/nn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mcpred/random.hpp"

namespace mcpred::nn {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

bool any_grad(std::initializer_list<Var> vars) {
  for (const Var& v : vars) {
    if (v.tape->requires_grad(v)) return true;
  }
  return false;
}

// row broadcast: b is either a's shape or 1 x a.cols
bool broadcasts(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) || (b.rows() == 1 && b.cols() == a.cols());
}

// Accumulates g into the gradient of an operand that was possibly row-broadcast.
void accumulate_broadcast(Tape& tape, Var operand, const Tensor& g, double sign = 1.0) {
  if (!tape.requires_grad(operand)) return;
  Tensor& dst = tape.grad(operand.id);
  if (dst.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += sign * g[i];
    return;
  }
  const std::size_t cols = g.cols();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c] += sign * g(r, c);
  }
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  const Tensor& av = a.value();
  Tensor out(av.shape(), std::vector<double>(av.size()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return a.tape->push(std::move(out), any_grad({a}), [a, deriv](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(a);
    const Tensor& y = t.value(Var{&t, self});
    Tensor& dx = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, nullptr, {}, false, {}});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(const Tensor& value, Tensor* grad_sink) {
  if (auto it = leaves_.find(&value); it != leaves_.end()) return Var{this, it->second};
  Node node;
  node.external = &value;
  node.grad_sink = recording_ ? grad_sink : nullptr;
  node.requires_grad = node.grad_sink != nullptr;
  nodes_.push_back(std::move(node));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  leaves_.emplace(&value, id);
  return Var{this, id};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.external ? *n.external : n.value;
}

Var Tape::push(Tensor value, bool requires_grad, Backward backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = recording_ && requires_grad;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad_sink) return *n.grad_sink;
  if (n.grad.empty()) {
    const Tensor& v = n.external ? *n.external : n.value;
    n.grad = Tensor(v.shape(), std::vector<double>(v.size(), 0.0));
  }
  return n.grad;
}

bool Tape::has_grad(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.grad_sink != nullptr || !n.grad.empty();
}

void Tape::backward(Var loss) {
  if (consumed_) throw std::logic_error("tape already consumed");
  if (!recording_) throw std::logic_error("backward on a non-recording tape");
  if (value(loss).size() != 1) throw std::logic_error("backward requires a scalar loss");
  consumed_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad(loss.id)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, static_cast<std::uint32_t>(i));
  }
}

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.cols() == B.rows(), "matmul: inner dimensions differ");
  const std::size_t r = A.rows(), k = A.cols(), c = B.cols();
  Tensor out(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double* orow = out.data() + i * c;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A(i, p);
      if (aip == 0.0) continue;
      const double* brow = B.data() + p * c;
      for (std::size_t j = 0; j < c; ++j) orow[j] += aip * brow[j];
    }
  }
  return a.tape->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, std::uint32_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    const std::size_t r = A.rows(), k = A.cols(), c = B.cols();
    if (t.requires_grad(a)) {
      Tensor& dA = t.grad(a.id);
      for (std::size_t i = 0; i < r; ++i) {
        const double* grow = G.data() + i * c;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B.data() + p * c;
          double acc = 0.0;
          for (std::size_t j = 0; j < c; ++j) acc += grow[j] * brow[j];
          dA(i, p) += acc;
        }
      }
    }
    if (t.requires_grad(b)) {
      Tensor& dB = t.grad(b.id);
      for (std::size_t i = 0; i < r; ++i) {
        const double* grow = G.data() + i * c;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A(i, p);
          if (aip == 0.0) continue;
          double* drow = dB.data() + p * c;
          for (std::size_t j = 0; j < c; ++j) drow[j] += aip * grow[j];
        }
      }
    }
  });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(broadcasts(A, B), "add: shape mismatch");
  Tensor out = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B.size() == A.size() ? B[i] : B[i % cols];
  return a.tape->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    accumulate_broadcast(t, a, g);
    accumulate_broadcast(t, b, g);
  });
}

Var sub(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(broadcasts(A, B), "sub: shape mismatch");
  Tensor out = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B.size() == A.size() ? B[i] : B[i % cols];
  return a.tape->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    accumulate_broadcast(t, a, g);
    accumulate_broadcast(t, b, g, -1.0);
  });
}

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(broadcasts(A, B), "mul: shape mismatch");
  Tensor out = A;
  const std::size_t cols = A.cols();
  const bool same = B.size() == A.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= same ? B[i] : B[i % cols];
  return a.tape->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    const std::size_t cols = A.cols();
    const bool same = B.size() == A.size();
    if (t.requires_grad(a)) {
      Tensor& dA = t.grad(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) dA[i] += g[i] * (same ? B[i] : B[i % cols]);
    }
    if (t.requires_grad(b)) {
      Tensor& dB = t.grad(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) dB[same ? i : i % cols] += g[i] * A[i];
    }
  });
}

Var div(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.same_shape(B), "div: shape mismatch");
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= B[i];
  return a.tape->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& dA = t.grad(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) dA[i] += g[i] / B[i];
    }
    if (t.requires_grad(b)) {
      Tensor& dB = t.grad(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) dB[i] -= g[i] * A[i] / (B[i] * B[i]);
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sqrt(Var a) {
  return unary(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sum(Var a) {
  const Tensor& A = a.value();
  double s = 0.0;
  for (double v : A.values()) s += v;
  return a.tape->push(Tensor::scalar(s), any_grad({a}), [a](Tape& t, std::uint32_t self) {
    const double g = t.grad(self)[0];
    Tensor& dA = t.grad(a.id);
    for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += g;
  });
}

Var row_sum(Var a) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), 1);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    double s = 0.0;
    for (double v : A.row_span(r)) s += v;
    out[r] = s;
  }
  return a.tape->push(std::move(out), any_grad({a}), [a](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    Tensor& dA = t.grad(a.id);
    const std::size_t cols = dA.cols();
    for (std::size_t r = 0; r < dA.rows(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) dA(r, c) += g[r];
    }
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  Tensor out(A.cols(), A.rows());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) out(c, r) = A(r, c);
  }
  return a.tape->push(std::move(out), any_grad({a}), [a](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    Tensor& dA = t.grad(a.id);
    for (std::size_t r = 0; r < dA.rows(); ++r) {
      for (std::size_t c = 0; c < dA.cols(); ++c) dA(r, c) += g(c, r);
    }
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  const Tensor& A = a.value();
  require(start + count <= A.rows(), "slice_rows: out of range");
  const std::size_t cols = A.cols();
  std::vector<double> vals(A.data() + start * cols, A.data() + (start + count) * cols);
  return a.tape->push(Tensor({count, cols}, std::move(vals)), any_grad({a}),
                      [a, start](Tape& t, std::uint32_t self) {
                        const Tensor& g = t.grad(self);
                        Tensor& dA = t.grad(a.id);
                        const std::size_t off = start * dA.cols();
                        for (std::size_t i = 0; i < g.size(); ++i) dA[off + i] += g[i];
                      });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  const Tensor& A = a.value();
  require(start + count <= A.cols(), "slice_cols: out of range");
  Tensor out(A.rows(), count);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = A(r, start + c);
  }
  return a.tape->push(std::move(out), any_grad({a}), [a, start](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    Tensor& dA = t.grad(a.id);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) dA(r, start + c) += g(r, c);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  bool rg = false;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
    rg = rg || p.tape->requires_grad(p);
  }
  std::vector<double> vals;
  vals.reserve(rows * cols);
  for (const Var& p : parts) {
    const auto v = p.value().values();
    vals.insert(vals.end(), v.begin(), v.end());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape->push(Tensor({rows, cols}, std::move(vals)), rg,
                             [inputs = std::move(inputs)](Tape& t, std::uint32_t self) {
                               const Tensor& g = t.grad(self);
                               std::size_t off = 0;
                               for (const Var& p : inputs) {
                                 const std::size_t n = t.value(p).size();
                                 if (t.requires_grad(p)) {
                                   Tensor& dp = t.grad(p.id);
                                   for (std::size_t i = 0; i < n; ++i) dp[i] += g[off + i];
                                 }
                                 off += n;
                               }
                             });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  bool rg = false;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
    rg = rg || p.tape->requires_grad(p);
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& P = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < P.cols(); ++c) out(r, off + c) = P(r, c);
    }
    off += P.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape->push(std::move(out), rg, [inputs = std::move(inputs)](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    std::size_t off = 0;
    for (const Var& p : inputs) {
      const std::size_t pc = t.value(p).cols();
      if (t.requires_grad(p)) {
        Tensor& dp = t.grad(p.id);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < pc; ++c) dp(r, c) += g(r, off + c);
        }
      }
      off += pc;
    }
  });
}

Var gather_rows(Var table, std::span<const std::int32_t> ids) {
  const Tensor& T = table.value();
  const std::size_t cols = T.cols();
  Tensor out(ids.size(), cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < T.rows(), "gather_rows: id out of range");
    std::copy_n(T.data() + static_cast<std::size_t>(ids[i]) * cols, cols, out.data() + i * cols);
  }
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  return table.tape->push(std::move(out), any_grad({table}),
                          [table, idx = std::move(idx)](Tape& t, std::uint32_t self) {
                            const Tensor& g = t.grad(self);
                            Tensor& dT = t.grad(table.id);
                            const std::size_t cols = g.cols();
                            for (std::size_t i = 0; i < idx.size(); ++i) {
                              double* dst = dT.data() + static_cast<std::size_t>(idx[i]) * cols;
                              for (std::size_t c = 0; c < cols; ++c) dst[c] += g(i, c);
                            }
                          });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = x.value();
  const Tensor& G = gain.value();
  const Tensor& B = bias.value();
  const std::size_t rows = X.rows(), cols = X.cols();
  require(G.size() == cols && B.size() == cols, "layer_norm: parameter size mismatch");
  Tensor normed(rows, cols);
  std::vector<double> inv_std(rows);
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += X(r, c);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (X(r, c) - mean) * (X(r, c) - mean);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      normed(r, c) = (X(r, c) - mean) * inv_std[r];
      out(r, c) = normed(r, c) * G[c] + B[c];
    }
  }
  return x.tape->push(
      std::move(out), any_grad({x, gain, bias}),
      [x, gain, bias, normed = std::move(normed), inv_std = std::move(inv_std)](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& G = t.value(gain);
        const std::size_t rows = g.rows(), cols = g.cols();
        if (t.requires_grad(gain)) {
          Tensor& dG = t.grad(gain.id);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) dG[c] += g(r, c) * normed(r, c);
          }
        }
        if (t.requires_grad(bias)) {
          Tensor& dB = t.grad(bias.id);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) dB[c] += g(r, c);
          }
        }
        if (t.requires_grad(x)) {
          Tensor& dX = t.grad(x.id);
          const double inv_n = 1.0 / static_cast<double>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_dn = 0.0, mean_dn_n = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double dn = g(r, c) * G[c];
              mean_dn += dn;
              mean_dn_n += dn * normed(r, c);
            }
            mean_dn *= inv_n;
            mean_dn_n *= inv_n;
            for (std::size_t c = 0; c < cols; ++c) {
              const double dn = g(r, c) * G[c];
              dX(r, c) += inv_std[r] * (dn - mean_dn - normed(r, c) * mean_dn_n);
            }
          }
        }
      });
}

Var softmax_rows(Var x, std::span<const bool> key_valid, std::span<const bool> query_valid) {
  const Tensor& X = x.value();
  const std::size_t rows = X.rows(), cols = X.cols();
  require(key_valid.empty() || key_valid.size() == cols, "softmax_rows: key mask length");
  require(query_valid.empty() || query_valid.size() == rows, "softmax_rows: query mask length");
  auto key_ok = [&](std::size_t c) { return key_valid.empty() || key_valid[c]; };
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!query_valid.empty() && !query_valid[r]) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (key_ok(c)) mx = std::max(mx, X(r, c));
    }
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!key_ok(c)) continue;
      out(r, c) = std::exp(X(r, c) - mx);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= z;
  }
  return x.tape->push(std::move(out), any_grad({x}), [x](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(Var{&t, self});
    Tensor& dX = t.grad(x.id);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) dX(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var log_softmax_at(Var x, std::size_t index) {
  const Tensor& X = x.value();
  require(X.rows() == 1 && index < X.cols(), "log_softmax_at: expects a row and a valid index");
  double mx = X[0];
  for (double v : X.values()) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : X.values()) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  return x.tape->push(Tensor::scalar(X[index] - lse), any_grad({x}), [x, index, lse](Tape& t, std::uint32_t self) {
    const double g = t.grad(self)[0];
    const Tensor& X = t.value(x);
    Tensor& dX = t.grad(x.id);
    for (std::size_t c = 0; c < X.cols(); ++c) {
      dX[c] += g * ((c == index ? 1.0 : 0.0) - std::exp(X[c] - lse));
    }
  });
}

Var dropout(Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  const Tensor& X = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(X.shape(), std::vector<double>(X.size()));
  for (std::size_t i = 0; i < X.size(); ++i) mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  Tensor out = X;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return x.tape->push(std::move(out), any_grad({x}), [x, mask = std::move(mask)](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    Tensor& dX = t.grad(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) dX[i] += g[i] * mask[i];
  });
}

std::vector<double> softmax(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("softmax of an empty vector");
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

}  // namespace mcpred::nn
