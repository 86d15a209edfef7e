#include "finegrain/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace finegrain {

namespace {

void check_rank(const TensorPtr& t, int lo, int hi, const char* op) {
  if (t->rank() < lo || t->rank() > hi) {
    throw DimError(std::string(op) + ": unsupported rank for shape " + shape_str(t->shape));
  }
}

// Views a [C,N] tensor as [1,C,N] for the batched kernels.
struct B3 {
  int b, c, n;
  bool was_rank2;
};

B3 as_b3(const TensorPtr& t, const char* op) {
  if (t->rank() == 2) return {1, t->dim(0), t->dim(1), true};
  if (t->rank() == 3) return {t->dim(0), t->dim(1), t->dim(2), false};
  throw DimError(std::string(op) + ": expected rank 2 or 3, got shape " + shape_str(t->shape));
}

std::vector<int> like_b3(const B3& v, int c, int n) {
  if (v.was_rank2) return {c, n};
  return {v.b, c, n};
}

}  // namespace

TensorPtr make_tensor(std::vector<int> shape, double fill, bool requires_grad) {
  for (int d : shape) {
    if (d <= 0) throw DimError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  auto t = std::make_shared<Tensor>();
  t->values.assign(shape_numel(shape), fill);
  t->shape = std::move(shape);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr tensor_from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimError("value count " + std::to_string(values.size()) + " does not match shape " +
                   shape_str(shape));
  }
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->requires_grad = requires_grad;
  return t;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream ss;
  ss << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) ss << "x";
    ss << shape[i];
  }
  ss << "]";
  return ss.str();
}

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

bool all_finite(const Tensor& t) {
  for (double v : t.values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

TensorPtr Tape::record(const char* op, TensorPtr out, std::function<void()> backward) {
  nodes_.push_back(Node{op, std::move(backward)});
  produced_.push_back(out);
  terminal_ = out.get();
  return out;
}

void Tape::backward(const TensorPtr& loss) {
  if (loss->size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss->shape));
  }
  if (loss.get() != terminal_) {
    throw ContractError("backward requires the tape's terminal tensor as loss");
  }
  for (auto& t : produced_) {
    t->ensure_grad();
    t->zero_grad();
  }
  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (size_t i = nodes_.size(); i-- > 0;) {
    nodes_[i].backward();
  }
}

// --- matmul -----------------------------------------------------------------

TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  int ra = a->rank(), rb = b->rank();
  if (!((ra == 2 && rb == 2) || (ra == 3 && rb == 3))) {
    throw DimError("matmul: rank mismatch between " + shape_str(a->shape) + " and " +
                   shape_str(b->shape));
  }
  int B = ra == 3 ? a->dim(0) : 1;
  int m = a->dim(ra - 2), k = a->dim(ra - 1);
  int kb = b->dim(rb - 2), n = b->dim(rb - 1);
  if (k != kb || (ra == 3 && b->dim(0) != B)) {
    throw DimError("matmul: incompatible shapes " + shape_str(a->shape) + " and " +
                   shape_str(b->shape));
  }
  std::vector<int> out_shape = ra == 3 ? std::vector<int>{B, m, n} : std::vector<int>{m, n};
  auto out = make_tensor(out_shape);
  const double* av = a->values.data();
  const double* bv = b->values.data();
  double* ov = out->values.data();
  for (int bi = 0; bi < B; ++bi) {
    const double* ab = av + static_cast<size_t>(bi) * m * k;
    const double* bb = bv + static_cast<size_t>(bi) * k * n;
    double* ob = ov + static_cast<size_t>(bi) * m * n;
    for (int i = 0; i < m; ++i) {
      for (int kk = 0; kk < k; ++kk) {
        double av_ik = ab[i * k + kk];
        if (av_ik == 0.0) continue;
        const double* brow = bb + kk * n;
        double* orow = ob + i * n;
        for (int j = 0; j < n; ++j) orow[j] += av_ik * brow[j];
      }
    }
  }
  return tape.record("matmul", out, [a, b, out, B, m, k, n]() {
    a->ensure_grad();
    b->ensure_grad();
    for (int bi = 0; bi < B; ++bi) {
      const double* go = out->grad.data() + static_cast<size_t>(bi) * m * n;
      const double* av = a->values.data() + static_cast<size_t>(bi) * m * k;
      const double* bv = b->values.data() + static_cast<size_t>(bi) * k * n;
      double* ga = a->grad.data() + static_cast<size_t>(bi) * m * k;
      double* gb = b->grad.data() + static_cast<size_t>(bi) * k * n;
      // dA = dOut * B^T
      for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
          double s = 0.0;
          const double* grow = go + i * n;
          const double* brow = bv + kk * n;
          for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
          ga[i * k + kk] += s;
        }
      }
      // dB = A^T * dOut
      for (int kk = 0; kk < k; ++kk) {
        for (int i = 0; i < m; ++i) {
          double av_ik = av[i * k + kk];
          if (av_ik == 0.0) continue;
          const double* grow = go + i * n;
          double* gbrow = gb + kk * n;
          for (int j = 0; j < n; ++j) gbrow[j] += av_ik * grow[j];
        }
      }
    }
  });
}

// --- conv1d -----------------------------------------------------------------

TensorPtr conv1d(Tape& tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias,
                 int padding) {
  B3 v = as_b3(x, "conv1d");
  check_rank(w, 3, 3, "conv1d weight");
  if (w->dim(1) != v.c) {
    throw DimError("conv1d: weight " + shape_str(w->shape) + " does not match input " +
                   shape_str(x->shape));
  }
  int c_out = w->dim(0), c_in = v.c, k = w->dim(2), L = v.n;
  if (k % 2 == 0) throw ConfigError("conv1d kernel size must be odd, got " + std::to_string(k));
  if (padding < 0) throw ConfigError("conv1d padding must be >= 0");
  if (bias->rank() != 1 || bias->dim(0) != c_out) {
    throw DimError("conv1d: bias " + shape_str(bias->shape) + " does not match weight " +
                   shape_str(w->shape));
  }
  int L_out = L + 2 * padding - k + 1;
  if (L_out < 1) {
    throw ConfigError("conv1d: kernel " + std::to_string(k) + " exceeds padded length " +
                      std::to_string(L + 2 * padding));
  }
  auto out = make_tensor(like_b3(v, c_out, L_out));
  const int B = v.b;
  for (int b = 0; b < B; ++b) {
    const double* xb = x->values.data() + static_cast<size_t>(b) * c_in * L;
    double* ob = out->values.data() + static_cast<size_t>(b) * c_out * L_out;
    for (int o = 0; o < c_out; ++o) {
      double bo = bias->values[o];
      double* orow = ob + static_cast<size_t>(o) * L_out;
      for (int j = 0; j < L_out; ++j) orow[j] = bo;
      for (int i = 0; i < c_in; ++i) {
        const double* xrow = xb + static_cast<size_t>(i) * L;
        const double* wrow = w->values.data() + (static_cast<size_t>(o) * c_in + i) * k;
        for (int t = 0; t < k; ++t) {
          double wv = wrow[t];
          if (wv == 0.0) continue;
          int off = t - padding;
          int j_lo = std::max(0, -off);
          int j_hi = std::min(L_out, L - off);
          for (int j = j_lo; j < j_hi; ++j) orow[j] += wv * xrow[j + off];
        }
      }
    }
  }
  int cb = v.b;
  return tape.record("conv1d", out, [x, w, bias, out, cb, c_out, c_in, k, L, L_out, padding]() {
    x->ensure_grad();
    w->ensure_grad();
    bias->ensure_grad();
    for (int b = 0; b < cb; ++b) {
      const double* xb = x->values.data() + static_cast<size_t>(b) * c_in * L;
      const double* gob = out->grad.data() + static_cast<size_t>(b) * c_out * L_out;
      double* gxb = x->grad.data() + static_cast<size_t>(b) * c_in * L;
      for (int o = 0; o < c_out; ++o) {
        const double* gorow = gob + static_cast<size_t>(o) * L_out;
        double gb = 0.0;
        for (int j = 0; j < L_out; ++j) gb += gorow[j];
        bias->grad[o] += gb;
        for (int i = 0; i < c_in; ++i) {
          const double* xrow = xb + static_cast<size_t>(i) * L;
          double* gxrow = gxb + static_cast<size_t>(i) * L;
          const double* wrow = w->values.data() + (static_cast<size_t>(o) * c_in + i) * k;
          double* gwrow = w->grad.data() + (static_cast<size_t>(o) * c_in + i) * k;
          for (int t = 0; t < k; ++t) {
            int off = t - padding;
            int j_lo = std::max(0, -off);
            int j_hi = std::min(L_out, L - off);
            double gw = 0.0;
            double wv = wrow[t];
            for (int j = j_lo; j < j_hi; ++j) {
              gw += gorow[j] * xrow[j + off];
              gxrow[j + off] += wv * gorow[j];
            }
            gwrow[t] += gw;
          }
        }
      }
    }
  });
}

// --- softmax ----------------------------------------------------------------

TensorPtr softmax_last(Tape& tape, const TensorPtr& x, const std::vector<int>& valid_len) {
  int r = x->rank();
  if (r < 1) throw DimError("softmax: empty shape");
  int n = x->dim(r - 1);
  size_t rows = x->size() / static_cast<size_t>(n);
  if (!valid_len.empty() && valid_len.size() != rows) {
    throw ContractError("softmax mask must have one entry per row");
  }
  auto out = make_tensor(x->shape);
  for (size_t row = 0; row < rows; ++row) {
    const double* xr = x->values.data() + row * n;
    double* orow = out->values.data() + row * n;
    int valid = valid_len.empty() ? n : valid_len[row];
    if (valid < 1 || valid > n) throw ContractError("softmax valid length out of range");
    double mx = xr[0];
    for (int i = 1; i < valid; ++i) mx = std::max(mx, xr[i]);
    double denom = 0.0;
    for (int i = 0; i < valid; ++i) {
      orow[i] = std::exp(xr[i] - mx);
      denom += orow[i];
    }
    for (int i = 0; i < valid; ++i) orow[i] /= denom;
    for (int i = valid; i < n; ++i) orow[i] = 0.0;
  }
  return tape.record("softmax", out, [x, out, n, rows, valid_len]() {
    x->ensure_grad();
    for (size_t row = 0; row < rows; ++row) {
      const double* s = out->values.data() + row * n;
      const double* go = out->grad.data() + row * n;
      double* gx = x->grad.data() + row * n;
      int valid = valid_len.empty() ? n : valid_len[row];
      double dot = 0.0;
      for (int i = 0; i < valid; ++i) dot += go[i] * s[i];
      for (int i = 0; i < valid; ++i) gx[i] += s[i] * (go[i] - dot);
    }
  });
}

// --- batch norm -------------------------------------------------------------

TensorPtr batch_norm(Tape& tape, const TensorPtr& x, BatchNormState& bn, bool train) {
  B3 v = as_b3(x, "batch_norm");
  int C = v.c, N = v.n, B = v.b;
  if (bn.gamma->dim(0) != C) {
    throw DimError("batch_norm: affine " + shape_str(bn.gamma->shape) + " does not match input " +
                   shape_str(x->shape));
  }
  auto out = make_tensor(x->shape);
  size_t M = static_cast<size_t>(B) * N;
  auto xhat = std::make_shared<std::vector<double>>(x->size());
  auto inv_std = std::make_shared<std::vector<double>>(C);
  auto idx = [C, N](int b, int c, int n) {
    return (static_cast<size_t>(b) * C + c) * N + n;
  };
  for (int c = 0; c < C; ++c) {
    double mean, var;
    if (train) {
      double s = 0.0;
      for (int b = 0; b < B; ++b)
        for (int n = 0; n < N; ++n) s += x->values[idx(b, c, n)];
      mean = s / static_cast<double>(M);
      double sq = 0.0;
      for (int b = 0; b < B; ++b)
        for (int n = 0; n < N; ++n) {
          double d = x->values[idx(b, c, n)] - mean;
          sq += d * d;
        }
      var = sq / static_cast<double>(M);
      bn.running_mean->values[c] = (1.0 - bn.momentum) * bn.running_mean->values[c] + bn.momentum * mean;
      bn.running_var->values[c] = (1.0 - bn.momentum) * bn.running_var->values[c] + bn.momentum * var;
    } else {
      mean = bn.running_mean->values[c];
      var = bn.running_var->values[c];
    }
    double is = 1.0 / std::sqrt(var + bn.eps);
    (*inv_std)[c] = is;
    double g = bn.gamma->values[c], be = bn.beta->values[c];
    for (int b = 0; b < B; ++b) {
      for (int n = 0; n < N; ++n) {
        size_t i = idx(b, c, n);
        double h = (x->values[i] - mean) * is;
        (*xhat)[i] = h;
        out->values[i] = g * h + be;
      }
    }
  }
  TensorPtr gamma = bn.gamma, beta = bn.beta;
  return tape.record("batch_norm", out, [x, out, gamma, beta, xhat, inv_std, B, C, N, M, train]() {
    x->ensure_grad();
    gamma->ensure_grad();
    beta->ensure_grad();
    auto idx = [C, N](int b, int c, int n) {
      return (static_cast<size_t>(b) * C + c) * N + n;
    };
    for (int c = 0; c < C; ++c) {
      double sum_g = 0.0, sum_gh = 0.0;
      for (int b = 0; b < B; ++b) {
        for (int n = 0; n < N; ++n) {
          size_t i = idx(b, c, n);
          sum_g += out->grad[i];
          sum_gh += out->grad[i] * (*xhat)[i];
        }
      }
      gamma->grad[c] += sum_gh;
      beta->grad[c] += sum_g;
      double g = gamma->values[c], is = (*inv_std)[c];
      if (train) {
        double mean_g = sum_g / static_cast<double>(M);
        double mean_gh = sum_gh / static_cast<double>(M);
        for (int b = 0; b < B; ++b) {
          for (int n = 0; n < N; ++n) {
            size_t i = idx(b, c, n);
            x->grad[i] += g * is * (out->grad[i] - mean_g - (*xhat)[i] * mean_gh);
          }
        }
      } else {
        for (int b = 0; b < B; ++b) {
          for (int n = 0; n < N; ++n) {
            size_t i = idx(b, c, n);
            x->grad[i] += g * is * out->grad[i];
          }
        }
      }
    }
  });
}

// --- layer norm -------------------------------------------------------------

TensorPtr layer_norm(Tape& tape, const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias,
                     double eps) {
  B3 v = as_b3(x, "layer_norm");
  int B = v.b, C = v.c, N = v.n;
  if (gain->dim(0) != C || bias->dim(0) != C) {
    throw DimError("layer_norm: affine " + shape_str(gain->shape) + " does not match input " +
                   shape_str(x->shape));
  }
  auto out = make_tensor(x->shape);
  auto xhat = std::make_shared<std::vector<double>>(x->size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(B) * N);
  auto idx = [C, N](int b, int c, int n) {
    return (static_cast<size_t>(b) * C + c) * N + n;
  };
  for (int b = 0; b < B; ++b) {
    for (int n = 0; n < N; ++n) {
      double s = 0.0;
      for (int c = 0; c < C; ++c) s += x->values[idx(b, c, n)];
      double mean = s / C;
      double sq = 0.0;
      for (int c = 0; c < C; ++c) {
        double d = x->values[idx(b, c, n)] - mean;
        sq += d * d;
      }
      double is = 1.0 / std::sqrt(sq / C + eps);
      (*inv_std)[static_cast<size_t>(b) * N + n] = is;
      for (int c = 0; c < C; ++c) {
        size_t i = idx(b, c, n);
        double h = (x->values[i] - mean) * is;
        (*xhat)[i] = h;
        out->values[i] = gain->values[c] * h + bias->values[c];
      }
    }
  }
  return tape.record("layer_norm", out, [x, out, gain, bias, xhat, inv_std, B, C, N]() {
    x->ensure_grad();
    gain->ensure_grad();
    bias->ensure_grad();
    auto idx = [C, N](int b, int c, int n) {
      return (static_cast<size_t>(b) * C + c) * N + n;
    };
    for (int b = 0; b < B; ++b) {
      for (int n = 0; n < N; ++n) {
        double sum_g = 0.0, sum_gh = 0.0;
        for (int c = 0; c < C; ++c) {
          size_t i = idx(b, c, n);
          double gg = out->grad[i] * gain->values[c];
          sum_g += gg;
          sum_gh += gg * (*xhat)[i];
          gain->grad[c] += out->grad[i] * (*xhat)[i];
          bias->grad[c] += out->grad[i];
        }
        double is = (*inv_std)[static_cast<size_t>(b) * N + n];
        for (int c = 0; c < C; ++c) {
          size_t i = idx(b, c, n);
          double gg = out->grad[i] * gain->values[c];
          x->grad[i] += is * (gg - sum_g / C - (*xhat)[i] * sum_gh / C);
        }
      }
    }
  });
}

// --- pointwise and shape ops ------------------------------------------------

TensorPtr relu(Tape& tape, const TensorPtr& x) {
  auto out = make_tensor(x->shape);
  for (size_t i = 0; i < x->size(); ++i) out->values[i] = x->values[i] > 0.0 ? x->values[i] : 0.0;
  return tape.record("relu", out, [x, out]() {
    x->ensure_grad();
    for (size_t i = 0; i < x->size(); ++i) {
      if (x->values[i] > 0.0) x->grad[i] += out->grad[i];
    }
  });
}

TensorPtr dropout(Tape& tape, const TensorPtr& x, double rate, bool train, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
  }
  if (!train || rate == 0.0) {
    auto out = tensor_from(x->shape, x->values);
    return tape.record("dropout_id", out, [x, out]() {
      x->ensure_grad();
      for (size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
    });
  }
  double keep = 1.0 - rate;
  double scale = 1.0 / keep;
  auto mask = std::make_shared<std::vector<uint8_t>>(x->size());
  auto out = make_tensor(x->shape);
  for (size_t i = 0; i < x->size(); ++i) {
    bool on = rng.unit() < keep;
    (*mask)[i] = on;
    out->values[i] = on ? x->values[i] * scale : 0.0;
  }
  return tape.record("dropout", out, [x, out, mask, scale]() {
    x->ensure_grad();
    for (size_t i = 0; i < x->size(); ++i) {
      if ((*mask)[i]) x->grad[i] += out->grad[i] * scale;
    }
  });
}

TensorPtr max_pool_length(Tape& tape, const TensorPtr& x) {
  B3 v = as_b3(x, "max_pool_length");
  int B = v.b, C = v.c, L = v.n;
  auto out = make_tensor(like_b3(v, 1, C));
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(B) * C);
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const double* row = x->values.data() + (static_cast<size_t>(b) * C + c) * L;
      int best = 0;
      for (int l = 1; l < L; ++l) {
        if (row[l] > row[best]) best = l;
      }
      (*argmax)[static_cast<size_t>(b) * C + c] = best;
      out->values[static_cast<size_t>(b) * C + c] = row[best];
    }
  }
  return tape.record("max_pool_length", out, [x, out, argmax, B, C, L]() {
    x->ensure_grad();
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < C; ++c) {
        size_t oc = static_cast<size_t>(b) * C + c;
        x->grad[(static_cast<size_t>(b) * C + c) * L + (*argmax)[oc]] += out->grad[oc];
      }
    }
  });
}

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) {
    throw DimError("add: shape mismatch between " + shape_str(a->shape) + " and " +
                   shape_str(b->shape));
  }
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] + b->values[i];
  return tape.record("add", out, [a, b, out]() {
    a->ensure_grad();
    b->ensure_grad();
    for (size_t i = 0; i < out->size(); ++i) {
      a->grad[i] += out->grad[i];
      b->grad[i] += out->grad[i];
    }
  });
}

TensorPtr add_bias_rows(Tape& tape, const TensorPtr& x, const TensorPtr& bias) {
  check_rank(x, 2, 2, "add_bias_rows");
  int B = x->dim(0), n = x->dim(1);
  if (bias->rank() != 1 || bias->dim(0) != n) {
    throw DimError("add_bias_rows: bias " + shape_str(bias->shape) + " does not match " +
                   shape_str(x->shape));
  }
  auto out = make_tensor(x->shape);
  for (int b = 0; b < B; ++b) {
    for (int j = 0; j < n; ++j) {
      out->values[static_cast<size_t>(b) * n + j] =
          x->values[static_cast<size_t>(b) * n + j] + bias->values[j];
    }
  }
  return tape.record("add_bias_rows", out, [x, bias, out, B, n]() {
    x->ensure_grad();
    bias->ensure_grad();
    for (int b = 0; b < B; ++b) {
      for (int j = 0; j < n; ++j) {
        size_t i = static_cast<size_t>(b) * n + j;
        x->grad[i] += out->grad[i];
        bias->grad[j] += out->grad[i];
      }
    }
  });
}

TensorPtr concat_last(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->rank() != b->rank()) {
    throw DimError("concat: rank mismatch between " + shape_str(a->shape) + " and " +
                   shape_str(b->shape));
  }
  int r = a->rank();
  for (int i = 0; i + 1 < r; ++i) {
    if (a->dim(i) != b->dim(i)) {
      throw DimError("concat: leading dims differ between " + shape_str(a->shape) + " and " +
                     shape_str(b->shape));
    }
  }
  int na = a->dim(r - 1), nb = b->dim(r - 1);
  std::vector<int> shape = a->shape;
  shape[static_cast<size_t>(r) - 1] = na + nb;
  auto out = make_tensor(shape);
  size_t rows = a->size() / static_cast<size_t>(na);
  for (size_t row = 0; row < rows; ++row) {
    double* orow = out->values.data() + row * (na + nb);
    std::copy_n(a->values.data() + row * na, na, orow);
    std::copy_n(b->values.data() + row * nb, nb, orow + na);
  }
  return tape.record("concat", out, [a, b, out, na, nb, rows]() {
    a->ensure_grad();
    b->ensure_grad();
    for (size_t row = 0; row < rows; ++row) {
      const double* grow = out->grad.data() + row * (na + nb);
      for (int i = 0; i < na; ++i) a->grad[row * na + i] += grow[i];
      for (int i = 0; i < nb; ++i) b->grad[row * nb + i] += grow[na + i];
    }
  });
}

TensorPtr replicate_length(Tape& tape, const TensorPtr& x, int n) {
  B3 v = as_b3(x, "replicate_length");
  if (v.n != 1) throw DimError("replicate_length expects a [.,C,1] tensor, got " + shape_str(x->shape));
  int B = v.b, C = v.c;
  auto out = make_tensor(like_b3(v, C, n));
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      double val = x->values[static_cast<size_t>(b) * C + c];
      double* orow = out->values.data() + (static_cast<size_t>(b) * C + c) * n;
      std::fill_n(orow, n, val);
    }
  }
  return tape.record("replicate_length", out, [x, out, B, C, n]() {
    x->ensure_grad();
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < C; ++c) {
        const double* grow = out->grad.data() + (static_cast<size_t>(b) * C + c) * n;
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += grow[i];
        x->grad[static_cast<size_t>(b) * C + c] += s;
      }
    }
  });
}

TensorPtr replicate_channels(Tape& tape, const TensorPtr& x, int c) {
  B3 v = as_b3(x, "replicate_channels");
  if (v.c != 1) throw DimError("replicate_channels expects a [.,1,F] tensor, got " + shape_str(x->shape));
  int B = v.b, F = v.n;
  auto out = make_tensor(like_b3(v, c, F));
  for (int b = 0; b < B; ++b) {
    const double* xrow = x->values.data() + static_cast<size_t>(b) * F;
    for (int ci = 0; ci < c; ++ci) {
      std::copy_n(xrow, F, out->values.data() + (static_cast<size_t>(b) * c + ci) * F);
    }
  }
  return tape.record("replicate_channels", out, [x, out, B, F, c]() {
    x->ensure_grad();
    for (int b = 0; b < B; ++b) {
      for (int ci = 0; ci < c; ++ci) {
        const double* grow = out->grad.data() + (static_cast<size_t>(b) * c + ci) * F;
        double* gx = x->grad.data() + static_cast<size_t>(b) * F;
        for (int f = 0; f < F; ++f) gx[f] += grow[f];
      }
    }
  });
}

TensorPtr transpose_cn(Tape& tape, const TensorPtr& x) {
  B3 v = as_b3(x, "transpose_cn");
  int B = v.b, C = v.c, N = v.n;
  auto out = make_tensor(like_b3(v, N, C));
  for (int b = 0; b < B; ++b) {
    const double* xb = x->values.data() + static_cast<size_t>(b) * C * N;
    double* ob = out->values.data() + static_cast<size_t>(b) * C * N;
    for (int c = 0; c < C; ++c) {
      for (int n = 0; n < N; ++n) ob[static_cast<size_t>(n) * C + c] = xb[static_cast<size_t>(c) * N + n];
    }
  }
  return tape.record("transpose_cn", out, [x, out, B, C, N]() {
    x->ensure_grad();
    for (int b = 0; b < B; ++b) {
      const double* gob = out->grad.data() + static_cast<size_t>(b) * C * N;
      double* gxb = x->grad.data() + static_cast<size_t>(b) * C * N;
      for (int c = 0; c < C; ++c) {
        for (int n = 0; n < N; ++n) gxb[static_cast<size_t>(c) * N + n] += gob[static_cast<size_t>(n) * C + c];
      }
    }
  });
}

TensorPtr zero_pad_last(Tape& tape, const TensorPtr& x, int target) {
  B3 v = as_b3(x, "zero_pad_last");
  if (target < v.n) throw DimError("zero_pad_last: target below current length");
  int B = v.b, C = v.c, N = v.n;
  auto out = make_tensor(like_b3(v, C, target));
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      std::copy_n(x->values.data() + (static_cast<size_t>(b) * C + c) * N, N,
                  out->values.data() + (static_cast<size_t>(b) * C + c) * target);
    }
  }
  return tape.record("zero_pad_last", out, [x, out, B, C, N, target]() {
    x->ensure_grad();
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < C; ++c) {
        const double* grow = out->grad.data() + (static_cast<size_t>(b) * C + c) * target;
        double* gx = x->grad.data() + (static_cast<size_t>(b) * C + c) * N;
        for (int i = 0; i < N; ++i) gx[i] += grow[i];
      }
    }
  });
}

TensorPtr slice_last(Tape& tape, const TensorPtr& x, int keep) {
  B3 v = as_b3(x, "slice_last");
  if (keep < 1 || keep > v.n) throw DimError("slice_last: keep out of range");
  int B = v.b, C = v.c, N = v.n;
  auto out = make_tensor(like_b3(v, C, keep));
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      std::copy_n(x->values.data() + (static_cast<size_t>(b) * C + c) * N, keep,
                  out->values.data() + (static_cast<size_t>(b) * C + c) * keep);
    }
  }
  return tape.record("slice_last", out, [x, out, B, C, N, keep]() {
    x->ensure_grad();
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < C; ++c) {
        const double* grow = out->grad.data() + (static_cast<size_t>(b) * C + c) * keep;
        double* gx = x->grad.data() + (static_cast<size_t>(b) * C + c) * N;
        for (int i = 0; i < keep; ++i) gx[i] += grow[i];
      }
    }
  });
}

TensorPtr reshape_copy(Tape& tape, const TensorPtr& x, std::vector<int> shape) {
  if (shape_numel(shape) != x->size()) {
    throw DimError("reshape: cannot view " + shape_str(x->shape) + " as " + shape_str(shape));
  }
  auto out = tensor_from(std::move(shape), x->values);
  return tape.record("reshape", out, [x, out]() {
    x->ensure_grad();
    for (size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
  });
}

TensorPtr bce_with_logits_mean(Tape& tape, const TensorPtr& logits, const TensorPtr& targets) {
  if (logits->shape != targets->shape) {
    throw DimError("bce: logits " + shape_str(logits->shape) + " vs targets " +
                   shape_str(targets->shape));
  }
  size_t n = logits->size();
  auto out = make_tensor({1});
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double z = logits->values[i], t = targets->values[i];
    // max(z,0) - z*t + log(1 + exp(-|z|))
    total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  out->values[0] = total / static_cast<double>(n);
  return tape.record("bce_with_logits", out, [logits, targets, out, n]() {
    logits->ensure_grad();
    double g = out->grad[0] / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
      double z = logits->values[i], t = targets->values[i];
      double sig = 1.0 / (1.0 + std::exp(-z));
      logits->grad[i] += g * (sig - t);
    }
  });
}

TensorPtr sum_all(Tape& tape, const TensorPtr& x) {
  auto out = make_tensor({1});
  double s = 0.0;
  for (double v : x->values) s += v;
  out->values[0] = s;
  return tape.record("sum_all", out, [x, out]() {
    x->ensure_grad();
    for (size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[0];
  });
}

TensorPtr take_scalar(Tape& tape, const TensorPtr& x, size_t flat_index) {
  if (flat_index >= x->size()) throw ContractError("take_scalar: index out of range");
  auto out = make_tensor({1});
  out->values[0] = x->values[flat_index];
  return tape.record("take_scalar", out, [x, out, flat_index]() {
    x->ensure_grad();
    x->grad[flat_index] += out->grad[0];
  });
}

}  // namespace finegrain
