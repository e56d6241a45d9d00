#include "pcdu/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "eigen_map.hpp"
#include "pcdu/errors.hpp"

namespace pcdu {

using detail::as_matrix;
using detail::row_stable_product;
using detail::Node;

Tensor& Node::grad_buffer() {
  if (grad.size() != value.size() || grad.shape() != value.shape()) grad = Tensor(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->leaf = true;
}

const Tensor& Var::grad() const { return node_->grad_buffer(); }

void Var::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.fill(Real(0));
}

Real Var::item() const {
  if (node_->value.size() != 1) {
    throw DimensionError("item", "self", "expected one element, got " + shape_string(shape()));
  }
  return node_->value[0];
}

Var Var::make(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  Var out(std::move(value), false);
  out.node_->leaf = false;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    out.node_->requires_grad = true;
    out.node_->backward = std::move(backward);
    out.node_->inputs.reserve(inputs.size());
    for (auto& in : inputs) out.node_->inputs.push_back(in.node_);
  }
  return out;
}

void backward(const Var& loss) {
  if (!loss.defined() || loss.value().size() != 1) {
    throw ValueError("backward: loss must be a scalar (one-element) node");
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{&loss.node(), 0}};
  seen.insert(&loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->leaf) n->grad = Tensor();
  }
  loss.node().grad_buffer()[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->leaf || !n->backward || n->grad.empty()) continue;
    n->backward(*n);
    if (n != &loss.node()) n->grad = Tensor();
  }
  if (!loss.node().leaf) loss.node().grad = Tensor();
}

namespace ops {
namespace {

void require_rank2(const char* op, const char* operand, const Var& x) {
  if (x.shape().size() != 2) {
    throw DimensionError(op, operand, "expected a matrix, got " + shape_string(x.shape()));
  }
}

Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

}  // namespace

Var matmul(const Var& x, const Var& w) {
  require_rank2("matmul", "x", x);
  require_rank2("matmul", "weights", w);
  if (x.cols() != w.rows()) {
    throw DimensionError("matmul", "weights",
                         "x is " + shape_string(x.shape()) + " but weights are " + shape_string(w.shape()));
  }
  Tensor out({x.rows(), w.cols()});
  row_stable_product(x.value(), w.value(), out);
  return Var::make(std::move(out), {x, w}, [](Node& self) {
    Node& a = in(self, 0);
    Node& b = in(self, 1);
    auto g = as_matrix(self.grad);
    if (a.requires_grad) as_matrix(a.grad_buffer()).noalias() += g * as_matrix(b.value).transpose();
    if (b.requires_grad) as_matrix(b.grad_buffer()).noalias() += as_matrix(a.value).transpose() * g;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_rank2("matmul_nt", "a", a);
  require_rank2("matmul_nt", "b", b);
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt", "b",
                         "a is " + shape_string(a.shape()) + " but b is " + shape_string(b.shape()));
  }
  Tensor out({a.rows(), b.rows()});
  as_matrix(out).noalias() = as_matrix(a.value()) * as_matrix(b.value()).transpose();
  return Var::make(std::move(out), {a, b}, [](Node& self) {
    Node& lhs = in(self, 0);
    Node& rhs = in(self, 1);
    auto g = as_matrix(self.grad);
    if (lhs.requires_grad) as_matrix(lhs.grad_buffer()).noalias() += g * as_matrix(rhs.value);
    if (rhs.requires_grad) as_matrix(rhs.grad_buffer()).noalias() += g.transpose() * as_matrix(lhs.value);
  });
}

Var add_bias(const Var& x, const Var& bias) {
  if (bias.value().size() != x.cols()) {
    throw DimensionError("add_bias", "bias",
                         std::to_string(bias.value().size()) + " entries for " + std::to_string(x.cols()) +
                             " columns");
  }
  Tensor out = x.value();
  const std::size_t c = out.cols();
  const Real* b = bias.value().data();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    Real* row = out.data() + r * c;
    for (std::size_t j = 0; j < c; ++j) row[j] += b[j];
  }
  return Var::make(std::move(out), {x, bias}, [](Node& self) {
    Node& xs = in(self, 0);
    Node& bs = in(self, 1);
    if (xs.requires_grad) as_matrix(xs.grad_buffer()) += as_matrix(self.grad);
    if (bs.requires_grad) {
      Tensor& gb = bs.grad_buffer();
      const std::size_t c = self.grad.cols();
      for (std::size_t r = 0; r < self.grad.rows(); ++r) {
        const Real* row = self.grad.data() + r * c;
        for (std::size_t j = 0; j < c; ++j) gb[j] += row[j];
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add", "b", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return Var::make(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& n = in(self, k);
      if (!n.requires_grad) continue;
      Tensor& g = n.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var scale(const Var& x, Real factor) {
  Tensor out = x.value();
  for (auto& v : out.values()) v *= factor;
  return Var::make(std::move(out), {x}, [factor](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Var elu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = v > Real(0) ? v : std::expm1(v);
  return Var::make(std::move(out), {x}, [](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    const Tensor& y = self.value;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Real d = y[i] > Real(0) ? Real(1) : y[i] + Real(1);
      g[i] += d * self.grad[i];
    }
  });
}

SegmentMax segment_max(const Var& x, std::span<const std::size_t> offsets) {
  require_rank2("segment_max", "x", x);
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != x.rows()) {
    throw DimensionError("segment_max", "offsets", "must run from 0 to the row count");
  }
  const std::size_t segments = offsets.size() - 1;
  const std::size_t c = x.cols();
  Tensor out({segments, c});
  std::vector<std::size_t> arg(segments * c);
  const Tensor& xv = x.value();
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t begin = offsets[s];
    const std::size_t end = offsets[s + 1];
    if (end <= begin) throw DimensionError("segment_max", "x", "empty point dimension");
    Real* o = out.data() + s * c;
    std::size_t* a = arg.data() + s * c;
    const Real* first = xv.data() + begin * c;
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = first[j];
      a[j] = begin;
    }
    for (std::size_t r = begin + 1; r < end; ++r) {
      const Real* row = xv.data() + r * c;
      for (std::size_t j = 0; j < c; ++j) {
        if (row[j] > o[j]) {
          o[j] = row[j];
          a[j] = r;
        }
      }
    }
  }
  Var values = Var::make(std::move(out), {x}, [arg, c](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i] * c + i % c] += self.grad[i];
  });
  return {std::move(values), std::move(arg)};
}

SegmentMax segment_max(const Var& x, std::size_t group) {
  require_rank2("segment_max", "x", x);
  if (group == 0 || x.rows() % group != 0) {
    throw DimensionError("segment_max", "x",
                         std::to_string(x.rows()) + " rows do not split into groups of " + std::to_string(group));
  }
  std::vector<std::size_t> offsets(x.rows() / group + 1);
  for (std::size_t s = 0; s < offsets.size(); ++s) offsets[s] = s * group;
  return segment_max(x, offsets);
}

Var gather_rows(const Var& x, std::span<const std::size_t> indices) {
  require_rank2("gather_rows", "x", x);
  const std::size_t c = x.cols();
  if (indices.empty()) throw DimensionError("gather_rows", "indices", "empty index list");
  Tensor out({indices.size(), c});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= x.rows()) {
      throw DimensionError("gather_rows", "indices",
                           "index " + std::to_string(indices[r]) + " >= " + std::to_string(x.rows()));
    }
    std::copy_n(x.value().data() + indices[r] * c, c, out.data() + r * c);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Var::make(std::move(out), {x}, [idx = std::move(idx), c](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      Real* dst = g.data() + idx[r] * c;
      const Real* src = self.grad.data() + r * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var weighted_gather(const Var& x, std::span<const std::size_t> indices, std::span<const Real> weights,
                    std::size_t per_row) {
  require_rank2("weighted_gather", "x", x);
  if (per_row == 0 || indices.size() != weights.size() || indices.size() % per_row != 0) {
    throw DimensionError("weighted_gather", "indices", "indices/weights do not form whole rows");
  }
  const std::size_t c = x.cols();
  const std::size_t rows = indices.size() / per_row;
  Tensor out({rows, c});
  for (std::size_t r = 0; r < rows; ++r) {
    Real* o = out.data() + r * c;
    for (std::size_t k = 0; k < per_row; ++k) {
      const std::size_t src = indices[r * per_row + k];
      if (src >= x.rows()) throw DimensionError("weighted_gather", "indices", "index out of range");
      const Real w = weights[r * per_row + k];
      const Real* s = x.value().data() + src * c;
      for (std::size_t j = 0; j < c; ++j) o[j] += w * s[j];
    }
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<Real> wts(weights.begin(), weights.end());
  return Var::make(std::move(out), {x},
                   [idx = std::move(idx), wts = std::move(wts), per_row, c](Node& self) {
                     Tensor& g = in(self, 0).grad_buffer();
                     for (std::size_t i = 0; i < idx.size(); ++i) {
                       const Real* src = self.grad.data() + (i / per_row) * c;
                       Real* dst = g.data() + idx[i] * c;
                       for (std::size_t j = 0; j < c; ++j) dst[j] += wts[i] * src[j];
                     }
                   });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols", "parts", "nothing to concatenate");
  const std::size_t rows = parts.front().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    require_rank2("concat_cols", "part", parts[p]);
    if (parts[p].rows() != rows) {
      throw DimensionError("concat_cols", "part " + std::to_string(p),
                           std::to_string(parts[p].rows()) + " rows, expected " + std::to_string(rows));
    }
    widths.push_back(parts[p].cols());
    total += parts[p].cols();
  }
  Tensor out({rows, total});
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[p], widths[p], out.data() + r * total + offset);
    }
    offset += widths[p];
  }
  return Var::make(std::move(out), parts, [widths, total](Node& self) {
    std::size_t offset = 0;
    const std::size_t rows = self.value.rows();
    for (std::size_t p = 0; p < widths.size(); ++p) {
      Node& part = in(self, p);
      if (part.requires_grad) {
        Tensor& g = part.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          const Real* src = self.grad.data() + r * total + offset;
          Real* dst = g.data() + r * widths[p];
          for (std::size_t j = 0; j < widths[p]; ++j) dst[j] += src[j];
        }
      }
      offset += widths[p];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows", "parts", "nothing to concatenate");
  const std::size_t c = parts.front().cols();
  std::size_t rows = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    require_rank2("concat_rows", "part", parts[p]);
    if (parts[p].cols() != c) {
      throw DimensionError("concat_rows", "part " + std::to_string(p),
                           std::to_string(parts[p].cols()) + " columns, expected " + std::to_string(c));
    }
    rows += parts[p].rows();
  }
  Tensor out({rows, c});
  std::size_t offset = 0;
  for (const auto& part : parts) {
    std::copy(part.value().values().begin(), part.value().values().end(), out.data() + offset);
    offset += part.value().size();
  }
  return Var::make(std::move(out), parts, [](Node& self) {
    std::size_t offset = 0;
    for (auto& input : self.inputs) {
      const std::size_t count = input->value.size();
      if (input->requires_grad) {
        Tensor& g = input->grad_buffer();
        for (std::size_t i = 0; i < count; ++i) g[i] += self.grad[offset + i];
      }
      offset += count;
    }
  });
}

Var repeat_rows(const Var& x, std::size_t times) {
  require_rank2("repeat_rows", "x", x);
  if (times == 0) throw DimensionError("repeat_rows", "times", "must be positive");
  const std::size_t c = x.cols();
  Tensor out({x.rows() * times, c});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t t = 0; t < times; ++t) {
      std::copy_n(x.value().data() + r * c, c, out.data() + (r * times + t) * c);
    }
  }
  return Var::make(std::move(out), {x}, [times, c](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      Real* dst = g.data() + (r / times) * c;
      const Real* src = self.grad.data() + r * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var row_normalize(const Var& x) {
  require_rank2("row_normalize", "x", x);
  const std::size_t c = x.cols();
  Tensor out = x.value();
  std::vector<Real> norms(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    Real sq = 0;
    for (Real v : out.row(r)) sq += v * v;
    const Real n = std::sqrt(sq);
    if (!(n > Real(0))) throw ValueError("row_normalize: row " + std::to_string(r) + " has zero norm");
    norms[r] = n;
    for (Real& v : out.row(r)) v /= n;
  }
  return Var::make(std::move(out), {x}, [norms = std::move(norms), c](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    for (std::size_t r = 0; r < norms.size(); ++r) {
      const Real* y = self.value.data() + r * c;
      const Real* gy = self.grad.data() + r * c;
      Real dot = 0;
      for (std::size_t j = 0; j < c; ++j) dot += y[j] * gy[j];
      Real* gx = g.data() + r * c;
      for (std::size_t j = 0; j < c; ++j) gx[j] += (gy[j] - y[j] * dot) / norms[r];
    }
  });
}

Var log_softmax_rows(const Var& x, bool exclude_diagonal) {
  require_rank2("log_softmax_rows", "x", x);
  const std::size_t rows = x.rows();
  const std::size_t c = x.cols();
  if (exclude_diagonal && (rows != c || c < 2)) {
    throw DimensionError("log_softmax_rows", "x", "diagonal exclusion needs a square matrix with >= 2 columns");
  }
  Tensor out({rows, c});
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* xr = x.value().data() + r * c;
    Real m = -std::numeric_limits<Real>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      if (exclude_diagonal && j == r) continue;
      m = std::max(m, xr[j]);
    }
    Real s = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (exclude_diagonal && j == r) continue;
      s += std::exp(xr[j] - m);
    }
    const Real lse = m + std::log(s);
    Real* o = out.data() + r * c;
    for (std::size_t j = 0; j < c; ++j) o[j] = (exclude_diagonal && j == r) ? Real(0) : xr[j] - lse;
  }
  return Var::make(std::move(out), {x}, [exclude_diagonal, c](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      const Real* y = self.value.data() + r * c;
      const Real* gy = self.grad.data() + r * c;
      Real total = 0;
      for (std::size_t j = 0; j < c; ++j) {
        if (exclude_diagonal && j == r) continue;
        total += gy[j];
      }
      Real* gx = g.data() + r * c;
      for (std::size_t j = 0; j < c; ++j) {
        if (exclude_diagonal && j == r) continue;
        gx[j] += gy[j] - std::exp(y[j]) * total;
      }
    }
  });
}

Var mean_pick(const Var& x, std::span<const std::size_t> columns) {
  require_rank2("mean_pick", "x", x);
  if (columns.size() != x.rows()) {
    throw DimensionError("mean_pick", "columns",
                         std::to_string(columns.size()) + " picks for " + std::to_string(x.rows()) + " rows");
  }
  const std::size_t c = x.cols();
  Real acc = 0;
  for (std::size_t r = 0; r < columns.size(); ++r) {
    if (columns[r] >= c) throw DimensionError("mean_pick", "columns", "column out of range");
    acc += x.value()(r, columns[r]);
  }
  const Real inv = Real(1) / static_cast<Real>(columns.size());
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  return Var::make(Tensor::scalar(acc * inv), {x}, [cols = std::move(cols), c, inv](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    for (std::size_t r = 0; r < cols.size(); ++r) g[r * c + cols[r]] += self.grad[0] * inv;
  });
}

Var sum(const Var& x) {
  Real acc = 0;
  for (Real v : x.value().values()) acc += v;
  return Var::make(Tensor::scalar(acc), {x}, [](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    for (auto& v : g.values()) v += self.grad[0];
  });
}

Var mean(const Var& x) { return scale(sum(x), Real(1) / static_cast<Real>(x.value().size())); }

Var sum_squares(const Var& x) {
  Real acc = 0;
  for (Real v : x.value().values()) acc += v * v;
  return Var::make(Tensor::scalar(acc), {x}, [](Node& self) {
    Node& xs = in(self, 0);
    Tensor& g = xs.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += Real(2) * xs.value[i] * self.grad[0];
  });
}

}  // namespace ops
}  // namespace pcdu
