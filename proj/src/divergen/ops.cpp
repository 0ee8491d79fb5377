#include "divergen/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "divergen/errors.hpp"

namespace divergen {
namespace ops {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

ECMap as_matrix(const Tensor& t) {
  return ECMap(t.data(), static_cast<Eigen::Index>(t.rows()),
               static_cast<Eigen::Index>(t.cols()));
}

EMap as_matrix(Tensor& t) {
  return EMap(t.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_str() +
                       " and " + b.shape_str());
}

bool is_bias_shape(const Tensor& bias, const Tensor& target) {
  return bias.rank() <= 2 && bias.rows() == 1 && bias.cols() == target.cols();
}

// Elementwise op with derivative expressible from the output value.
template <typename Fwd, typename Dfwd>
NodeId pointwise(Tape& tape, NodeId a, Fwd fwd, Dfwd dfdy) {
  const Tensor& x = tape.value(a);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = fwd(x[i]);
  }
  return tape.make_node(std::move(y), {a}, [a, dfdy](Tape& t, NodeId self) {
    const Tensor& out = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor d(out.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
      d[i] = g[i] * dfdy(out[i]);
    }
    t.accumulate_grad(a, d);
  });
}

}  // namespace

NodeId matmul(Tape& tape, NodeId a, NodeId b) {
  const Tensor& va = tape.value(a);
  const Tensor& vb = tape.value(b);
  if (va.rank() != 2 || vb.rank() != 2 || va.cols() != vb.rows()) {
    shape_error("matmul", va, vb);
  }
  Tensor y({va.rows(), vb.cols()});
  as_matrix(y).noalias() = as_matrix(va) * as_matrix(vb);
  return tape.make_node(std::move(y), {a, b}, [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a)) {
      as_matrix(t.grad(a)).noalias() += as_matrix(g) * as_matrix(t.value(b)).transpose();
    }
    if (t.requires_grad(b)) {
      as_matrix(t.grad(b)).noalias() += as_matrix(t.value(a)).transpose() * as_matrix(g);
    }
  });
}

NodeId add(Tape& tape, NodeId a, NodeId b) {
  const Tensor& va = tape.value(a);
  const Tensor& vb = tape.value(b);
  if (va.same_shape(vb)) {
    Tensor y(va.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = va[i] + vb[i];
    }
    return tape.make_node(std::move(y), {a, b}, [a, b](Tape& t, NodeId self) {
      const Tensor& g = t.grad(self);
      t.accumulate_grad(a, g);
      t.accumulate_grad(b, g);
    });
  }
  if (!is_bias_shape(vb, va)) {
    shape_error("add", va, vb);
  }
  // Bias-add: vb broadcast over the rows of va.
  Tensor y(va.shape());
  std::size_t rows = va.rows();
  std::size_t cols = va.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      y[r * cols + c] = va[r * cols + c] + vb[c];
    }
  }
  return tape.make_node(std::move(y), {a, b}, [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    t.accumulate_grad(a, g);
    if (t.requires_grad(b)) {
      Tensor db(t.value(b).shape());
      std::size_t rows = g.rows();
      std::size_t cols = g.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          db[c] += g[r * cols + c];
        }
      }
      t.accumulate_grad(b, db);
    }
  });
}

NodeId mul(Tape& tape, NodeId a, NodeId b) {
  const Tensor& va = tape.value(a);
  const Tensor& vb = tape.value(b);
  if (!va.same_shape(vb)) {
    shape_error("mul", va, vb);
  }
  Tensor y(va.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = va[i] * vb[i];
  }
  return tape.make_node(std::move(y), {a, b}, [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a)) {
      const Tensor& vb = t.value(b);
      Tensor da(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) {
        da[i] = g[i] * vb[i];
      }
      t.accumulate_grad(a, da);
    }
    if (t.requires_grad(b)) {
      const Tensor& va = t.value(a);
      Tensor db(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) {
        db[i] = g[i] * va[i];
      }
      t.accumulate_grad(b, db);
    }
  });
}

NodeId concat(Tape& tape, NodeId a, NodeId b) {
  const Tensor& va = tape.value(a);
  const Tensor& vb = tape.value(b);
  if (va.rank() != vb.rank() || va.rows() != vb.rows()) {
    shape_error("concat", va, vb);
  }
  std::vector<std::size_t> shape = va.shape();
  shape.back() = va.cols() + vb.cols();
  Tensor y(shape);
  std::size_t rows = va.rows();
  std::size_t ca = va.cols();
  std::size_t cb = vb.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ca; ++c) {
      y[r * (ca + cb) + c] = va[r * ca + c];
    }
    for (std::size_t c = 0; c < cb; ++c) {
      y[r * (ca + cb) + ca + c] = vb[r * cb + c];
    }
  }
  return tape.make_node(std::move(y), {a, b}, [a, b, ca, cb](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    std::size_t rows = g.rows();
    if (t.requires_grad(a)) {
      Tensor da(t.value(a).shape());
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < ca; ++c) {
          da[r * ca + c] = g[r * (ca + cb) + c];
        }
      }
      t.accumulate_grad(a, da);
    }
    if (t.requires_grad(b)) {
      Tensor db(t.value(b).shape());
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cb; ++c) {
          db[r * cb + c] = g[r * (ca + cb) + ca + c];
        }
      }
      t.accumulate_grad(b, db);
    }
  });
}

NodeId slice(Tape& tape, NodeId a, std::size_t begin, std::size_t len) {
  const Tensor& va = tape.value(a);
  if (len == 0 || begin + len > va.cols()) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " +
                         std::to_string(begin + len) + ") out of range for " +
                         va.shape_str());
  }
  std::vector<std::size_t> shape = va.shape();
  shape.back() = len;
  Tensor y(shape);
  std::size_t rows = va.rows();
  std::size_t cols = va.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < len; ++c) {
      y[r * len + c] = va[r * cols + begin + c];
    }
  }
  return tape.make_node(std::move(y), {a}, [a, begin, len](Tape& t, NodeId self) {
    if (!t.requires_grad(a)) {
      return;
    }
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a);
    std::size_t rows = g.rows();
    std::size_t cols = ga.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < len; ++c) {
        ga[r * cols + begin + c] += g[r * len + c];
      }
    }
  });
}

NodeId sigmoid(Tape& tape, NodeId a) {
  return pointwise(
      tape, a,
      [](double x) {
        // Two-branch form keeps exp() away from overflow for large |x|.
        if (x >= 0) {
          return 1.0 / (1.0 + std::exp(-x));
        }
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

NodeId tanh(Tape& tape, NodeId a) {
  return pointwise(tape, a, [](double x) { return std::tanh(x); },
                   [](double y) { return 1.0 - y * y; });
}

NodeId softmax(Tape& tape, NodeId a) {
  const Tensor& x = tape.value(a);
  Tensor y(x.shape());
  std::size_t rows = x.rows();
  std::size_t cols = x.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* yr = y.data() + r * cols;
    double mx = xr[0];
    for (std::size_t c = 1; c < cols; ++c) {
      mx = std::max(mx, xr[c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      z += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] /= z;
    }
  }
  return tape.make_node(std::move(y), {a}, [a](Tape& t, NodeId self) {
    // dx = s * (g - sum(g * s)) per row.
    const Tensor& s = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor d(s.shape());
    std::size_t rows = s.rows();
    std::size_t cols = s.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* sr = s.data() + r * cols;
      const double* gr = g.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        dot += gr[c] * sr[c];
      }
      double* dr = d.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) {
        dr[c] = sr[c] * (gr[c] - dot);
      }
    }
    t.accumulate_grad(a, d);
  });
}

NodeId log_softmax(Tape& tape, NodeId a) {
  // Stable form: x - max - log(sum(exp(x - max))).
  const Tensor& x = tape.value(a);
  Tensor y(x.shape());
  std::size_t rows = x.rows();
  std::size_t cols = x.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* yr = y.data() + r * cols;
    double mx = xr[0];
    for (std::size_t c = 1; c < cols; ++c) {
      mx = std::max(mx, xr[c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      z += std::exp(xr[c] - mx);
    }
    double lse = mx + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = xr[c] - lse;
    }
  }
  return tape.make_node(std::move(y), {a}, [a](Tape& t, NodeId self) {
    // dx = g - exp(out) * sum(g) per row.
    const Tensor& out = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor d(out.shape());
    std::size_t rows = out.rows();
    std::size_t cols = out.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* or_ = out.data() + r * cols;
      const double* gr = g.data() + r * cols;
      double gsum = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        gsum += gr[c];
      }
      double* dr = d.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) {
        dr[c] = gr[c] - std::exp(or_[c]) * gsum;
      }
    }
    t.accumulate_grad(a, d);
  });
}

NodeId embedding_lookup(Tape& tape, NodeId table, std::span<const int> ids) {
  const Tensor& tab = tape.value(table);
  if (tab.rank() != 2) {
    throw DimensionError("embedding_lookup: table must be rank 2, got " +
                         tab.shape_str());
  }
  std::size_t dim = tab.cols();
  std::size_t vocab = tab.rows();
  Tensor y({ids.size(), dim});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    int id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw ContractError("embedding_lookup: id " + std::to_string(id) +
                          " out of range for table " + tab.shape_str());
    }
    for (std::size_t c = 0; c < dim; ++c) {
      y[i * dim + c] = tab[static_cast<std::size_t>(id) * dim + c];
    }
  }
  std::vector<int> held(ids.begin(), ids.end());
  return tape.make_node(std::move(y), {table},
                        [table, held = std::move(held), dim](Tape& t, NodeId self) {
                          if (!t.requires_grad(table)) {
                            return;
                          }
                          const Tensor& g = t.grad(self);
                          Tensor& gt = t.grad(table);
                          for (std::size_t i = 0; i < held.size(); ++i) {
                            std::size_t row = static_cast<std::size_t>(held[i]);
                            for (std::size_t c = 0; c < dim; ++c) {
                              gt[row * dim + c] += g[i * dim + c];
                            }
                          }
                        });
}

NodeId sum(Tape& tape, NodeId a) {
  const Tensor& x = tape.value(a);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += x[i];
  }
  return tape.make_node(Tensor::scalar(total), {a}, [a](Tape& t, NodeId self) {
    if (!t.requires_grad(a)) {
      return;
    }
    double g = t.grad(self)[0];
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] += g;
    }
  });
}

NodeId scale(Tape& tape, NodeId a, double factor) {
  const Tensor& x = tape.value(a);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] * factor;
  }
  return tape.make_node(std::move(y), {a}, [a, factor](Tape& t, NodeId self) {
    if (!t.requires_grad(a)) {
      return;
    }
    const Tensor& g = t.grad(self);
    Tensor d(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      d[i] = g[i] * factor;
    }
    t.accumulate_grad(a, d);
  });
}

}  // namespace ops
}  // namespace divergen
