#include "a2mae/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Core>

namespace a2mae::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MatMap as_matrix(Tensor& t) {
  return MatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void same_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw std::invalid_argument("operands belong to different (or no) tapes");
  }
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

// Number of times `b` repeats across `a` (1 for identical shapes).
std::size_t broadcast_reps(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return 1;
  if (b.size() < a.size() && std::equal(b.rbegin(), b.rend(), a.rbegin())) return numel(a) / numel(b);
  shape_error(op, a, b);
}

struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                                to_string(s));
  }
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

const Tensor& Var::value() const { return tape_->value_of(id_); }
const Tensor& Var::grad() const { return tape_->grad_of(id_); }

Var Tape::add_leaf(Tensor value, bool requires_grad, Parameter* sink) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  n.sink = n.requires_grad ? sink : nullptr;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return add_leaf(std::move(value), false, nullptr); }
Var Tape::variable(Tensor value) { return add_leaf(std::move(value), true, nullptr); }
Var Tape::parameter(Parameter& p) { return add_leaf(p.value, true, &p); }

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const auto& v : inputs) {
    if (&v.tape() != this) throw std::invalid_argument("input recorded on a different tape");
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  n.requires_grad = n.requires_grad && grad_enabled_;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::grad_of(std::size_t id) const {
  const auto& n = nodes_.at(id);
  if (n.grad.size() == 0) throw std::logic_error("no gradient recorded for node " + std::to_string(id));
  return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  }
  if (backward_done_) throw std::logic_error("backward: already called on this tape; call reset() first");
  backward_done_ = true;
  // Leaves the loss does not depend on get a zero gradient.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].requires_grad && nodes_[i].inputs.empty()) grad_buffer(i);
  }
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id()).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.sink) {
      auto& g = n.sink->grad;
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

void Tape::reset() {
  for (auto& n : nodes_) n.grad = Tensor();
  backward_done_ = false;
}

// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) shape_error("matmul", av.shape(), bv.shape());
  Tensor out({av.rows(), bv.cols()});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const auto g = as_matrix(t.grad_of(self));
    if (t.requires_grad(ia)) as_matrix(t.grad_buffer(ia)).noalias() += g * as_matrix(t.value_of(ib)).transpose();
    if (t.requires_grad(ib)) as_matrix(t.grad_buffer(ib)).noalias() += as_matrix(t.value_of(ia)).transpose() * g;
  });
}

namespace {

enum class Elementwise { Add, Sub, Mul };

Var binary(const Var& a, const Var& b, Elementwise kind, const char* name) {
  same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t reps = broadcast_reps(name, av.shape(), bv.shape());
  const std::size_t nb = bv.size();
  Tensor out(av.shape());
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t k = 0; k < nb; ++k) {
      const std::size_t i = r * nb + k;
      switch (kind) {
        case Elementwise::Add: out[i] = av[i] + bv[k]; break;
        case Elementwise::Sub: out[i] = av[i] - bv[k]; break;
        case Elementwise::Mul: out[i] = av[i] * bv[k]; break;
      }
    }
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, reps, nb, kind](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    if (t.requires_grad(ia)) {
      auto& ga = t.grad_buffer(ia);
      const auto& bv = t.value_of(ib);
      for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t k = 0; k < nb; ++k) {
          const std::size_t i = r * nb + k;
          ga[i] += kind == Elementwise::Mul ? g[i] * bv[k] : g[i];
        }
      }
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_buffer(ib);
      const auto& av = t.value_of(ia);
      for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t k = 0; k < nb; ++k) {
          const std::size_t i = r * nb + k;
          switch (kind) {
            case Elementwise::Add: gb[k] += g[i]; break;
            case Elementwise::Sub: gb[k] -= g[i]; break;
            case Elementwise::Mul: gb[k] += g[i] * av[i]; break;
          }
        }
      }
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(a, b, Elementwise::Add, "add"); }
Var sub(const Var& a, const Var& b) { return binary(a, b, Elementwise::Sub, "sub"); }
Var mul(const Var& a, const Var& b) { return binary(a, b, Elementwise::Mul, "mul"); }

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, s](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var transpose(const Var& a) {
  const auto& av = a.value();
  if (av.rank() != 2) throw std::invalid_argument("transpose: expected rank 2, got " + to_string(av.shape()));
  Tensor out({av.cols(), av.rows()});
  as_matrix(out) = as_matrix(av).transpose();
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    as_matrix(t.grad_buffer(ia)) += as_matrix(t.grad_of(self)).transpose();
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape shape = parts.front().shape();
  if (axis >= shape.size()) throw std::invalid_argument("concat: axis out of range for " + to_string(shape));
  std::size_t total = 0;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    Shape s = p.shape();
    if (s.size() != shape.size()) shape_error("concat", shape, s);
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != shape[d]) shape_error("concat", shape, s);
    }
    total += s[axis];
  }
  shape[axis] = total;
  const auto split = split_axis(shape, axis, "concat");
  Tensor out(shape);
  std::vector<std::size_t> ids, offsets, lens;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    const std::size_t len = pv.shape()[axis];
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(pv.data().begin() + static_cast<std::ptrdiff_t>(o * len * split.inner), len * split.inner,
                  out.data().begin() + static_cast<std::ptrdiff_t>((o * total + offset) * split.inner));
    }
    ids.push_back(p.id());
    offsets.push_back(offset);
    lens.push_back(len);
    offset += len;
  }
  return parts.front().tape().record(
      std::move(out), parts, [ids, offsets, lens, split, total](Tape& t, std::size_t self) {
        const auto& g = t.grad_of(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.requires_grad(ids[k])) continue;
          auto& gp = t.grad_buffer(ids[k]);
          for (std::size_t o = 0; o < split.outer; ++o) {
            const std::size_t n = lens[k] * split.inner;
            const std::size_t src = (o * total + offsets[k]) * split.inner;
            const std::size_t dst = o * n;
            for (std::size_t i = 0; i < n; ++i) gp[dst + i] += g[src + i];
          }
        }
      });
}

Var slice(const Var& a, std::size_t axis, std::size_t start, std::size_t length) {
  const auto& av = a.value();
  const auto split = split_axis(av.shape(), axis, "slice");
  if (length == 0 || start + length > split.len) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                                ") out of bounds for shape " + to_string(av.shape()));
  }
  Shape shape = av.shape();
  shape[axis] = length;
  Tensor out(shape);
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(av.data().begin() + static_cast<std::ptrdiff_t>((o * split.len + start) * split.inner),
                length * split.inner, out.data().begin() + static_cast<std::ptrdiff_t>(o * length * split.inner));
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, split, start, length](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t o = 0; o < split.outer; ++o) {
      const std::size_t n = length * split.inner;
      const std::size_t dst = (o * split.len + start) * split.inner;
      for (std::size_t i = 0; i < n; ++i) ga[dst + i] += g[o * n + i];
    }
  });
}

Var softmax(const Var& a, std::size_t axis) {
  const auto& av = a.value();
  const auto sp = split_axis(av.shape(), axis, "softmax");
  Tensor out(av.shape());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      auto idx = [&](std::size_t k) { return (o * sp.len + k) * sp.inner + i; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < sp.len; ++k) mx = std::max(mx, av[idx(k)]);
      double z = 0.0;
      for (std::size_t k = 0; k < sp.len; ++k) {
        out[idx(k)] = std::exp(av[idx(k)] - mx);
        z += out[idx(k)];
      }
      for (std::size_t k = 0; k < sp.len; ++k) out[idx(k)] /= z;
    }
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, sp](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& y = t.value_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        auto idx = [&](std::size_t k) { return (o * sp.len + k) * sp.inner + i; };
        double dot = 0.0;
        for (std::size_t k = 0; k < sp.len; ++k) dot += g[idx(k)] * y[idx(k)];
        for (std::size_t k = 0; k < sp.len; ++k) ga[idx(k)] += y[idx(k)] * (g[idx(k)] - dot);
      }
    }
  });
}

Var layernorm(const Var& a, std::size_t axis, double eps) {
  const auto& av = a.value();
  const auto sp = split_axis(av.shape(), axis, "layernorm");
  Tensor out(av.shape());
  std::vector<double> inv_sigma(sp.outer * sp.inner);
  const auto n = static_cast<double>(sp.len);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      auto idx = [&](std::size_t k) { return (o * sp.len + k) * sp.inner + i; };
      double mu = 0.0;
      for (std::size_t k = 0; k < sp.len; ++k) mu += av[idx(k)];
      mu /= n;
      double var = 0.0;
      for (std::size_t k = 0; k < sp.len; ++k) var += (av[idx(k)] - mu) * (av[idx(k)] - mu);
      var /= n;
      const double is = 1.0 / std::sqrt(var + eps);
      inv_sigma[o * sp.inner + i] = is;
      for (std::size_t k = 0; k < sp.len; ++k) out[idx(k)] = (av[idx(k)] - mu) * is;
    }
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, sp, n, inv_sigma = std::move(inv_sigma)](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& y = t.value_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        auto idx = [&](std::size_t k) { return (o * sp.len + k) * sp.inner + i; };
        double mg = 0.0, mgy = 0.0;
        for (std::size_t k = 0; k < sp.len; ++k) {
          mg += g[idx(k)];
          mgy += g[idx(k)] * y[idx(k)];
        }
        mg /= n;
        mgy /= n;
        const double is = inv_sigma[o * sp.inner + i];
        for (std::size_t k = 0; k < sp.len; ++k) ga[idx(k)] += is * (g[idx(k)] - mg - y[idx(k)] * mgy);
      }
    }
  });
}

Var gelu(const Var& a) {
  const auto& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = 0.5 * av[i] * (1.0 + std::erf(av[i] * std::numbers::sqrt2 / 2));
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& x = t.value_of(ia);
    auto& ga = t.grad_buffer(ia);
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(x[i] * std::numbers::sqrt2 / 2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[i] * x[i]);
      ga[i] += g[i] * (cdf + x[i] * pdf);
    }
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const auto ia = a.id();
  return a.tape().record(Tensor::scalar(s), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    for (auto& v : t.grad_buffer(ia).data()) v += g;
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var gather_rows(const Var& a, const std::vector<std::size_t>& rows) {
  const auto& av = a.value();
  if (av.rank() != 2) throw std::invalid_argument("gather_rows: expected rank 2, got " + to_string(av.shape()));
  if (rows.empty()) throw std::invalid_argument("gather_rows: empty index list");
  const std::size_t c = av.cols();
  Tensor out({rows.size(), c});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= av.rows()) {
      throw std::invalid_argument("gather_rows: row " + std::to_string(rows[r]) + " out of range for " +
                                  to_string(av.shape()));
    }
    std::copy_n(av.row(rows[r]).begin(), c, out.row(r).begin());
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, rows, c](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t k = 0; k < c; ++k) ga[rows[r] * c + k] += g[r * c + k];
    }
  });
}

Var mean_rows(const Var& a) {
  const auto& av = a.value();
  if (av.rank() != 2) throw std::invalid_argument("mean_rows: expected rank 2, got " + to_string(av.shape()));
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({1, c});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t k = 0; k < c; ++k) out[k] += av[i * c + k];
  }
  for (auto& v : out.data()) v /= static_cast<double>(r);
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ia);
    const double w = 1.0 / static_cast<double>(r);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t k = 0; k < c; ++k) ga[i * c + k] += w * g[k];
    }
  });
}

Var mse(const Var& pred, const Var& target, const Tensor& mask) {
  same_tape(pred, target);
  const auto& p = pred.value();
  const auto& q = target.value();
  if (p.shape() != q.shape()) shape_error("mse", p.shape(), q.shape());
  if (mask.shape() != p.shape()) shape_error("mse mask", p.shape(), mask.shape());
  double count = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (mask[i] == 0.0) continue;
    count += 1.0;
    acc += (p[i] - q[i]) * (p[i] - q[i]);
  }
  if (count == 0.0) throw std::invalid_argument("mse: mask selects no entries");
  const auto ip = pred.id(), iq = target.id();
  return pred.tape().record(Tensor::scalar(acc / count), {pred, target},
                            [ip, iq, mask, count](Tape& t, std::size_t self) {
                              const double g = t.grad_of(self)[0];
                              const auto& p = t.value_of(ip);
                              const auto& q = t.value_of(iq);
                              const bool gp = t.requires_grad(ip), gq = t.requires_grad(iq);
                              for (std::size_t i = 0; i < p.size(); ++i) {
                                if (mask[i] == 0.0) continue;
                                const double d = 2.0 * g * (p[i] - q[i]) / count;
                                if (gp) t.grad_buffer(ip)[i] += d;
                                if (gq) t.grad_buffer(iq)[i] -= d;
                              }
                            });
}

}  // namespace a2mae::nn
