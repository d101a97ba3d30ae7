#include "wingen/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wingen::ops {

namespace {

void require_matrix(const DenseArray& a, const char* op) {
    if (a.rank() != 2) throw ShapeError(std::string(op) + " expects a matrix, got " + shape_str(a.shape()));
}

void require_same(const DenseArray& a, const DenseArray& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + " shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

DenseArray make(Tape& t, Shape shape, std::vector<double> data) {
    return DenseArray(std::move(shape), std::move(data), t.precision());
}

// Accumulates g into parent's gradient if the parent is differentiable.
template <class F>
void accumulate(Tape& t, Var parent, F&& f) {
    if (!t.needs_grad(parent.id)) return;
    f(t.grad(parent.id));
}

// out[n x m] += a[n x k] * b[k x m]
void gemm_nn(const double* a, const double* b, double* out, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        double* o = out + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            const double* br = b + p * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
        }
    }
}

// out[n x m] += a[n x k] * b[m x k]^T
void gemm_nt(const double* a, const double* b, double* out, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* ar = a + i * k;
        for (std::size_t j = 0; j < m; ++j) {
            const double* br = b + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
            out[i * m + j] += s;
        }
    }
}

// out[k x m] += a[n x k]^T * b[n x m]
void gemm_tn(const double* a, const double* b, double* out, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* br = b + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            double* o = out + p * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
        }
    }
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    const auto& B = b.value();
    require_matrix(A, "matmul");
    require_matrix(B, "matmul");
    if (A.dim(1) != B.dim(0))
        throw ShapeError("matmul shape mismatch: " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
    const std::size_t n = A.dim(0), k = A.dim(1), m = B.dim(1);
    std::vector<double> out(n * m, 0.0);
    gemm_nn(A.data().data(), B.data().data(), out.data(), n, k, m);
    return t.push(make(t, {n, m}, std::move(out)), {a, b}, [a, b, n, k, m](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            gemm_nt(g.data(), b.value().data().data(), ga.data(), n, m, k);
        });
        accumulate(t, b, [&](std::vector<double>& gb) {
            gemm_tn(a.value().data().data(), g.data(), gb.data(), n, k, m);
        });
    });
}

Var matmul_nt(Var a, Var b) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    const auto& B = b.value();
    require_matrix(A, "matmul_nt");
    require_matrix(B, "matmul_nt");
    if (A.dim(1) != B.dim(1))
        throw ShapeError("matmul_nt shape mismatch: " + shape_str(A.shape()) + " x " + shape_str(B.shape()) +
                         "^T");
    const std::size_t n = A.dim(0), k = A.dim(1), m = B.dim(0);
    std::vector<double> out(n * m, 0.0);
    gemm_nt(A.data().data(), B.data().data(), out.data(), n, k, m);
    return t.push(make(t, {n, m}, std::move(out)), {a, b}, [a, b, n, k, m](Tape& t, int self) {
        const auto& g = t.grad(self);
        // dA = g * B ; dB = g^T * A
        accumulate(t, a, [&](std::vector<double>& ga) {
            gemm_nn(g.data(), b.value().data().data(), ga.data(), n, m, k);
        });
        accumulate(t, b, [&](std::vector<double>& gb) {
            gemm_tn(g.data(), a.value().data().data(), gb.data(), n, m, k);
        });
    });
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    require_matrix(A, "transpose");
    const std::size_t n = A.dim(0), m = A.dim(1);
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[j * n + i] = A[i * m + j];
    return t.push(make(t, {m, n}, std::move(out)), {a}, [a, n, m](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += g[j * n + i];
        });
    });
}

Var add(Var a, Var b) {
    Tape& t = *a.tape;
    require_same(a.value(), b.value(), "add");
    const auto& A = a.value();
    const auto& B = b.value();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
    return t.push(make(t, A.shape(), std::move(out)), {a, b}, [a, b](Tape& t, int self) {
        const auto& g = t.grad(self);
        for (Var p : {a, b})
            accumulate(t, p, [&](std::vector<double>& gp) {
                for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
            });
    });
}

Var sub(Var a, Var b) {
    Tape& t = *a.tape;
    require_same(a.value(), b.value(), "sub");
    const auto& A = a.value();
    const auto& B = b.value();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
    return t.push(make(t, A.shape(), std::move(out)), {a, b}, [a, b](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
        accumulate(t, b, [&](std::vector<double>& gb) {
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        });
    });
}

Var mul(Var a, Var b) {
    Tape& t = *a.tape;
    require_same(a.value(), b.value(), "mul");
    const auto& A = a.value();
    const auto& B = b.value();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
    return t.push(make(t, A.shape(), std::move(out)), {a, b}, [a, b](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            const auto& B = b.value();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
        });
        accumulate(t, b, [&](std::vector<double>& gb) {
            const auto& A = a.value();
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
        });
    });
}

Var scale(Var a, double s) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * s;
    return t.push(make(t, A.shape(), std::move(out)), {a}, [a, s](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
        });
    });
}

Var add_const(Var a, double c) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + c;
    return t.push(make(t, A.shape(), std::move(out)), {a}, [a](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    });
}

Var scale_by(Var a, Var s) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    if (s.value().size() != 1) throw ShapeError("scale_by expects a 1-element scale, got " + shape_str(s.shape()));
    const double sv = s.value()[0];
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * sv;
    return t.push(make(t, A.shape(), std::move(out)), {a, s}, [a, s](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            const double sv = s.value()[0];
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv;
        });
        accumulate(t, s, [&](std::vector<double>& gs) {
            const auto& A = a.value();
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * A[i];
            gs[0] += acc;
        });
    });
}

namespace {
std::size_t row_width(const DenseArray& x, const DenseArray& row, const char* op) {
    require_matrix(x, op);
    if (row.size() != x.dim(1))
        throw ShapeError(std::string(op) + " row length mismatch: " + shape_str(x.shape()) + " vs " +
                         shape_str(row.shape()));
    return x.dim(1);
}
}  // namespace

Var add_row(Var x, Var row) {
    Tape& t = *x.tape;
    const auto& X = x.value();
    const auto& R = row.value();
    const std::size_t d = row_width(X, R, "add_row");
    const std::size_t n = X.dim(0);
    std::vector<double> out(X.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = X[i * d + j] + R[j];
    return t.push(make(t, X.shape(), std::move(out)), {x, row}, [x, row, n, d](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, x, [&](std::vector<double>& gx) {
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
        accumulate(t, row, [&](std::vector<double>& gr) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) gr[j] += g[i * d + j];
        });
    });
}

Var mul_row(Var x, Var row) {
    Tape& t = *x.tape;
    const auto& X = x.value();
    const auto& R = row.value();
    const std::size_t d = row_width(X, R, "mul_row");
    const std::size_t n = X.dim(0);
    std::vector<double> out(X.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = X[i * d + j] * R[j];
    return t.push(make(t, X.shape(), std::move(out)), {x, row}, [x, row, n, d](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, x, [&](std::vector<double>& gx) {
            const auto& R = row.value();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * d + j] * R[j];
        });
        accumulate(t, row, [&](std::vector<double>& gr) {
            const auto& X = x.value();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) gr[j] += g[i * d + j] * X[i * d + j];
        });
    });
}

Var square(Var a) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * A[i];
    return t.push(make(t, A.shape(), std::move(out)), {a}, [a](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            const auto& A = a.value();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * g[i] * A[i];
        });
    });
}

Var gelu(Var a) {
    // tanh approximation; smooth everywhere so finite differences stay well-behaved
    Tape& t = *a.tape;
    const auto& A = a.value();
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = A[i];
        out[i] = 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
    }
    return t.push(make(t, A.shape(), std::move(out)), {a}, [a](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            const auto& A = a.value();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double x = A[i];
                const double u = c * (x + 0.044715 * x * x * x);
                const double th = std::tanh(u);
                const double du = c * (1.0 + 3.0 * 0.044715 * x * x);
                ga[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du);
            }
        });
    });
}

Var silu(Var a) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] / (1.0 + std::exp(-A[i]));
    return t.push(make(t, A.shape(), std::move(out)), {a}, [a](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            const auto& A = a.value();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double s = 1.0 / (1.0 + std::exp(-A[i]));
                ga[i] += g[i] * (s * (1.0 + A[i] * (1.0 - s)));
            }
        });
    });
}

Var layer_norm_rows(Var x, double eps) {
    Tape& t = *x.tape;
    const auto& X = x.value();
    if (X.rank() == 0 || X.shape().back() == 0) throw ShapeError("layer_norm_rows on empty rows");
    const std::size_t d = X.shape().back();
    const std::size_t n = X.size() / d;
    std::vector<double> out(X.size());
    std::vector<double> inv_std(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = X.data().data() + i * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += r[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (r[j] - mu) * (r[j] - mu);
        var /= static_cast<double>(d);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = (r[j] - mu) * inv_std[i];
    }
    // keep the unrounded normalized values for the backward pass
    std::vector<double> xhat = t.recording() ? out : std::vector<double>{};
    return t.push(make(t, X.shape(), std::move(out)), {x},
                  [x, n, d, inv_std = std::move(inv_std), xhat = std::move(xhat)](Tape& t, int self) {
                      const auto& g = t.grad(self);
                      accumulate(t, x, [&](std::vector<double>& gx) {
                          for (std::size_t i = 0; i < n; ++i) {
                              const double* gi = g.data() + i * d;
                              const double* xh = xhat.data() + i * d;
                              double sg = 0.0, sgx = 0.0;
                              for (std::size_t j = 0; j < d; ++j) {
                                  sg += gi[j];
                                  sgx += gi[j] * xh[j];
                              }
                              const double dd = static_cast<double>(d);
                              for (std::size_t j = 0; j < d; ++j)
                                  gx[i * d + j] += inv_std[i] * (gi[j] - sg / dd - xh[j] * sgx / dd);
                          }
                      });
                  });
}

namespace {
Var softmax_impl(Var a, const std::vector<std::uint8_t>* allow) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    if (A.rank() == 0 || A.shape().back() == 0)
        throw ShapeError("softmax_rows needs a non-empty last axis, got " + shape_str(A.shape()));
    if (allow && allow->size() != A.size()) throw ShapeError("softmax mask size mismatch");
    const std::size_t d = A.shape().back();
    const std::size_t n = A.size() / d;
    std::vector<double> out(A.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = A.data().data() + i * d;
        double* y = out.data() + i * d;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < d; ++j)
            if (!allow || (*allow)[i * d + j]) mx = std::max(mx, x[j]);
        if (mx == -INFINITY) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            if (allow && !(*allow)[i * d + j]) continue;
            y[j] = std::exp(x[j] - mx);
            s += y[j];
        }
        for (std::size_t j = 0; j < d; ++j) y[j] /= s;
    }
    return t.push(make(t, A.shape(), out), {a}, [a, n, d, p = out](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += g[i * d + j] * p[i * d + j];
                for (std::size_t j = 0; j < d; ++j) ga[i * d + j] += p[i * d + j] * (g[i * d + j] - dot);
            }
        });
    });
}
}  // namespace

Var softmax_rows(Var a) { return softmax_impl(a, nullptr); }

Var masked_softmax_rows(Var a, const std::vector<std::uint8_t>& allow) { return softmax_impl(a, &allow); }

Var rotary(Var x, const DenseArray& angles) {
    Tape& t = *x.tape;
    const auto& X = x.value();
    require_matrix(X, "rotary");
    const std::size_t n = X.dim(0), d = X.dim(1);
    if (d % 2 != 0 || angles.size() != n * (d / 2))
        throw ShapeError("rotary angle table " + shape_str(angles.shape()) + " does not fit " + shape_str(X.shape()));
    const std::size_t pairs = d / 2;
    std::vector<double> cs(n * pairs), sn(n * pairs);
    for (std::size_t i = 0; i < cs.size(); ++i) {
        cs[i] = std::cos(angles[i]);
        sn[i] = std::sin(angles[i]);
    }
    std::vector<double> out(X.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < pairs; ++p) {
            const double a0 = X[i * d + 2 * p], a1 = X[i * d + 2 * p + 1];
            const double c = cs[i * pairs + p], s = sn[i * pairs + p];
            out[i * d + 2 * p] = a0 * c - a1 * s;
            out[i * d + 2 * p + 1] = a0 * s + a1 * c;
        }
    return t.push(make(t, X.shape(), std::move(out)), {x},
                  [x, n, d, pairs, cs = std::move(cs), sn = std::move(sn)](Tape& t, int self) {
                      const auto& g = t.grad(self);
                      accumulate(t, x, [&](std::vector<double>& gx) {
                          for (std::size_t i = 0; i < n; ++i)
                              for (std::size_t p = 0; p < pairs; ++p) {
                                  const double g0 = g[i * d + 2 * p], g1 = g[i * d + 2 * p + 1];
                                  const double c = cs[i * pairs + p], s = sn[i * pairs + p];
                                  gx[i * d + 2 * p] += g0 * c + g1 * s;
                                  gx[i * d + 2 * p + 1] += -g0 * s + g1 * c;
                              }
                      });
                  });
}

Var slice_rows(Var a, std::size_t r0, std::size_t r1) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    require_matrix(A, "slice_rows");
    if (r0 > r1 || r1 > A.dim(0))
        throw ShapeError("slice_rows [" + std::to_string(r0) + "," + std::to_string(r1) + ") out of " +
                         shape_str(A.shape()));
    const std::size_t d = A.dim(1);
    std::vector<double> out(A.data().begin() + r0 * d, A.data().begin() + r1 * d);
    return t.push(make(t, {r1 - r0, d}, std::move(out)), {a}, [a, r0, r1, d](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < (r1 - r0) * d; ++i) ga[r0 * d + i] += g[i];
        });
    });
}

Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    require_matrix(A, "slice_cols");
    if (c0 > c1 || c1 > A.dim(1))
        throw ShapeError("slice_cols [" + std::to_string(c0) + "," + std::to_string(c1) + ") out of " +
                         shape_str(A.shape()));
    const std::size_t n = A.dim(0), d = A.dim(1), w = c1 - c0;
    std::vector<double> out(n * w);
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(A.data().begin() + i * d + c0, w, out.begin() + i * w);
    return t.push(make(t, {n, w}, std::move(out)), {a}, [a, c0, n, d, w](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < w; ++j) ga[i * d + c0 + j] += g[i * w + j];
        });
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows of nothing");
    Tape& t = *parts.front().tape;
    const std::size_t d = parts.front().value().dim(1);
    std::size_t n = 0;
    for (const auto& p : parts) {
        require_matrix(p.value(), "concat_rows");
        if (p.value().dim(1) != d)
            throw ShapeError("concat_rows width mismatch: " + shape_str(p.shape()) + " vs width " + std::to_string(d));
        n += p.value().dim(0);
    }
    std::vector<double> out;
    out.reserve(n * d);
    for (const auto& p : parts) out.insert(out.end(), p.value().data().begin(), p.value().data().end());
    return t.push(make(t, {n, d}, std::move(out)), parts, [parts](Tape& t, int self) {
        const auto& g = t.grad(self);
        std::size_t off = 0;
        for (const auto& p : parts) {
            const std::size_t sz = p.value().size();
            accumulate(t, p, [&](std::vector<double>& gp) {
                for (std::size_t i = 0; i < sz; ++i) gp[i] += g[off + i];
            });
            off += sz;
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols of nothing");
    Tape& t = *parts.front().tape;
    const std::size_t n = parts.front().value().dim(0);
    std::size_t d = 0;
    for (const auto& p : parts) {
        require_matrix(p.value(), "concat_cols");
        if (p.value().dim(0) != n)
            throw ShapeError("concat_cols height mismatch: " + shape_str(p.shape()) + " vs rows " + std::to_string(n));
        d += p.value().dim(1);
    }
    std::vector<double> out(n * d);
    std::size_t c = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.value().dim(1);
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(p.value().data().begin() + i * w, w, out.begin() + i * d + c);
        c += w;
    }
    return t.push(make(t, {n, d}, std::move(out)), parts, [parts, n, d](Tape& t, int self) {
        const auto& g = t.grad(self);
        std::size_t c = 0;
        for (const auto& p : parts) {
            const std::size_t w = p.value().dim(1);
            accumulate(t, p, [&](std::vector<double>& gp) {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * d + c + j];
            });
            c += w;
        }
    });
}

Var gather_rows(Var a, const std::vector<long>& index) {
    Tape& t = *a.tape;
    const auto& A = a.value();
    require_matrix(A, "gather_rows");
    const std::size_t n = A.dim(0), d = A.dim(1);
    std::vector<double> out(index.size() * d, 0.0);
    for (std::size_t r = 0; r < index.size(); ++r) {
        const long i = index[r];
        if (i < 0) continue;
        if (static_cast<std::size_t>(i) >= n)
            throw ShapeError("gather_rows index " + std::to_string(i) + " out of " + shape_str(A.shape()));
        std::copy_n(A.data().begin() + i * d, d, out.begin() + r * d);
    }
    return t.push(make(t, {index.size(), d}, std::move(out)), {a}, [a, index, d](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            for (std::size_t r = 0; r < index.size(); ++r) {
                if (index[r] < 0) continue;
                for (std::size_t j = 0; j < d; ++j) ga[index[r] * d + j] += g[r * d + j];
            }
        });
    });
}

Var reshape(Var a, Shape shape) {
    Tape& t = *a.tape;
    DenseArray v = a.value().reshaped(std::move(shape));
    return t.push(std::move(v), {a}, [a](Tape& t, int self) {
        const auto& g = t.grad(self);
        accumulate(t, a, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    });
}

Var sum(Var a) {
    Tape& t = *a.tape;
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return t.push(make(t, {1}, {s}), {a}, [a](Tape& t, int self) {
        const double g = t.grad(self)[0];
        accumulate(t, a, [&](std::vector<double>& ga) {
            for (auto& v : ga) v += g;
        });
    });
}

Var mean(Var a) {
    const auto n = a.value().size();
    if (n == 0) throw ShapeError("mean of empty array");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var weighted_sum(Var a, const DenseArray& w) {
    Tape& t = *a.tape;
    if (w.size() != a.value().size())
        throw ShapeError("weighted_sum weight size mismatch: " + shape_str(a.shape()) + " vs " + shape_str(w.shape()));
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * a.value()[i];
    return t.push(make(t, {1}, {s}), {a}, [a, w](Tape& t, int self) {
        const double g = t.grad(self)[0];
        accumulate(t, a, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * w[i];
        });
    });
}

}  // namespace wingen::ops
