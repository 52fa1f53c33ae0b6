#include "trice/ops.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "trice/kernels.hpp"

namespace trice::ops {

namespace {

thread_local long g_dead_rows = 0;

bool want_grad(const Tape& t, std::initializer_list<const Tensor*> xs) {
  if (!t.recording()) return false;
  for (const Tensor* x : xs)
    if (x->node >= 0) return true;
  return false;
}

void require_rank2(const Tensor& a, const char* who) {
  if (a.rank() != 2) throw ShapeError(std::string(who) + ": rank-2 expected");
}

}  // namespace

long dead_softmax_rows() { return g_dead_rows; }
void reset_dead_softmax_rows() { g_dead_rows = 0; }

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw ShapeError("matmul: inner dimensions disagree");
  Tensor out({m, n});
  kernels::matmul(m, k, n, a.data(), b.data(), out.mut());
  maybe_check_finite(out, "matmul");
  if (want_grad(t, {&a, &b})) {
    const int pa = a.node, pb = b.node;
    out.node = t.add_node({pa, pb}, [a, b, pa, pb, m, k, n](const Tensor& g,
                                                            GradMap& grads) {
      if (pa >= 0) {
        Tensor da({m, k});
        kernels::matmul_nt(m, n, k, g.data(), b.data(), da.mut());
        accumulate_grad(grads[static_cast<size_t>(pa)], da);
      }
      if (pb >= 0) {
        Tensor db({k, n});
        kernels::matmul_tn(m, k, n, a.data(), g.data(), db.mut());
        accumulate_grad(grads[static_cast<size_t>(pb)], db);
      }
    });
  }
  return out;
}

Tensor matmul_nt(Tape& t, const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) throw ShapeError("matmul_nt: inner dimensions disagree");
  Tensor out({m, n});
  kernels::matmul_nt(m, k, n, a.data(), b.data(), out.mut());
  maybe_check_finite(out, "matmul_nt");
  if (want_grad(t, {&a, &b})) {
    const int pa = a.node, pb = b.node;
    out.node = t.add_node({pa, pb}, [a, b, pa, pb, m, k, n](const Tensor& g,
                                                            GradMap& grads) {
      if (pa >= 0) {
        Tensor da({m, k});
        kernels::matmul(m, n, k, g.data(), b.data(), da.mut());
        accumulate_grad(grads[static_cast<size_t>(pa)], da);
      }
      if (pb >= 0) {
        Tensor db({n, k});
        kernels::matmul_tn(m, n, k, g.data(), a.data(), db.mut());
        accumulate_grad(grads[static_cast<size_t>(pb)], db);
      }
    });
  }
  return out;
}

Tensor transpose(Tape& t, const Tensor& a) {
  require_rank2(a, "transpose");
  const int m = a.rows(), n = a.cols();
  Tensor out({n, m});
  kernels::transpose(m, n, a.data(), out.mut());
  if (want_grad(t, {&a})) {
    const int pa = a.node;
    out.node = t.add_node({pa}, [pa, m, n](const Tensor& g, GradMap& grads) {
      Tensor da({m, n});
      kernels::transpose(n, m, g.data(), da.mut());
      accumulate_grad(grads[static_cast<size_t>(pa)], da);
    });
  }
  return out;
}

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("add: shape mismatch");
  Tensor out(a.shape());
  kernels::add(a.numel(), a.data(), b.data(), out.mut());
  maybe_check_finite(out, "add");
  if (want_grad(t, {&a, &b})) {
    const int pa = a.node, pb = b.node;
    out.node = t.add_node({pa, pb}, [pa, pb](const Tensor& g, GradMap& grads) {
      if (pa >= 0) accumulate_grad(grads[static_cast<size_t>(pa)], g);
      if (pb >= 0) accumulate_grad(grads[static_cast<size_t>(pb)], g);
    });
  }
  return out;
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("mul: shape mismatch");
  Tensor out(a.shape());
  real* o = out.mut();
  const real* ap = a.data();
  const real* bp = b.data();
  for (long i = 0; i < a.numel(); ++i) o[i] = ap[i] * bp[i];
  maybe_check_finite(out, "mul");
  if (want_grad(t, {&a, &b})) {
    const int pa = a.node, pb = b.node;
    out.node =
        t.add_node({pa, pb}, [a, b, pa, pb](const Tensor& g, GradMap& grads) {
          const real* gp = g.data();
          if (pa >= 0) {
            Tensor da(a.shape());
            real* d = da.mut();
            const real* bp2 = b.data();
            for (long i = 0; i < g.numel(); ++i) d[i] = gp[i] * bp2[i];
            accumulate_grad(grads[static_cast<size_t>(pa)], da);
          }
          if (pb >= 0) {
            Tensor db(b.shape());
            real* d = db.mut();
            const real* ap2 = a.data();
            for (long i = 0; i < g.numel(); ++i) d[i] = gp[i] * ap2[i];
            accumulate_grad(grads[static_cast<size_t>(pb)], db);
          }
        });
  }
  return out;
}

Tensor add_n(Tape& t, const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ContractError("add_n: empty argument list");
  Tensor out(xs[0].shape());
  real* o = out.mut();
  std::memcpy(o, xs[0].data(), sizeof(real) * static_cast<size_t>(out.numel()));
  for (size_t i = 1; i < xs.size(); ++i) {
    if (!xs[i].same_shape(xs[0])) throw ShapeError("add_n: shape mismatch");
    kernels::axpy(out.numel(), real(1), xs[i].data(), o);
  }
  maybe_check_finite(out, "add_n");
  bool any = false;
  for (const Tensor& x : xs) any = any || x.node >= 0;
  if (t.recording() && any) {
    std::vector<int> ps;
    ps.reserve(xs.size());
    for (const Tensor& x : xs) ps.push_back(x.node);
    out.node = t.add_node(ps, [ps](const Tensor& g, GradMap& grads) {
      for (int p : ps)
        if (p >= 0) accumulate_grad(grads[static_cast<size_t>(p)], g);
    });
  }
  return out;
}

Tensor add_rowvec(Tape& t, const Tensor& a, const Tensor& bias) {
  require_rank2(a, "add_rowvec");
  if (bias.rank() != 1 || bias.dim(0) != a.cols())
    throw ShapeError("add_rowvec: bias width mismatch");
  const int m = a.rows(), n = a.cols();
  Tensor out({m, n});
  kernels::add_rowvec(m, n, a.data(), bias.data(), out.mut());
  maybe_check_finite(out, "add_rowvec");
  if (want_grad(t, {&a, &bias})) {
    const int pa = a.node, pb = bias.node;
    out.node =
        t.add_node({pa, pb}, [pa, pb, m, n](const Tensor& g, GradMap& grads) {
          if (pa >= 0) accumulate_grad(grads[static_cast<size_t>(pa)], g);
          if (pb >= 0) {
            Tensor db({n});
            kernels::colsum(m, n, g.data(), db.mut());
            accumulate_grad(grads[static_cast<size_t>(pb)], db);
          }
        });
  }
  return out;
}

Tensor scale(Tape& t, const Tensor& a, real c) {
  Tensor out(a.shape());
  kernels::scale(a.numel(), c, a.data(), out.mut());
  maybe_check_finite(out, "scale");
  if (want_grad(t, {&a})) {
    const int pa = a.node;
    out.node = t.add_node({pa}, [pa, c](const Tensor& g, GradMap& grads) {
      Tensor da(g.shape());
      kernels::scale(g.numel(), c, g.data(), da.mut());
      accumulate_grad(grads[static_cast<size_t>(pa)], da);
    });
  }
  return out;
}

Tensor slice_rows(Tape& t, const Tensor& a, int r0, int r1) {
  require_rank2(a, "slice_rows");
  const int m = a.rows(), n = a.cols();
  if (r0 < 0 || r1 < r0 || r1 > m) throw IndexError("slice_rows: bad range");
  Tensor out({r1 - r0, n});
  std::memcpy(out.mut(), a.data() + static_cast<long>(r0) * n,
              sizeof(real) * static_cast<size_t>(out.numel()));
  if (want_grad(t, {&a})) {
    const int pa = a.node;
    out.node =
        t.add_node({pa}, [pa, m, n, r0](const Tensor& g, GradMap& grads) {
          Tensor da({m, n});
          std::memcpy(da.mut() + static_cast<long>(r0) * n, g.data(),
                      sizeof(real) * static_cast<size_t>(g.numel()));
          accumulate_grad(grads[static_cast<size_t>(pa)], da);
        });
  }
  return out;
}

Tensor concat_rows(Tape& t, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: empty argument list");
  const int n = parts[0].cols();
  int m = 0;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != n) throw ShapeError("concat_rows: width mismatch");
    m += p.rows();
  }
  Tensor out({m, n});
  real* o = out.mut();
  long off = 0;
  for (const Tensor& p : parts) {
    std::memcpy(o + off * n, p.data(),
                sizeof(real) * static_cast<size_t>(p.numel()));
    off += p.rows();
  }
  bool any = false;
  for (const Tensor& p : parts) any = any || p.node >= 0;
  if (t.recording() && any) {
    std::vector<int> ps;
    std::vector<int> lens;
    for (const Tensor& p : parts) {
      ps.push_back(p.node);
      lens.push_back(p.rows());
    }
    out.node = t.add_node(ps, [ps, lens, n](const Tensor& g, GradMap& grads) {
      long r = 0;
      for (size_t i = 0; i < ps.size(); ++i) {
        if (ps[i] >= 0) {
          Tensor dp({lens[i], n});
          std::memcpy(dp.mut(), g.data() + r * n,
                      sizeof(real) * static_cast<size_t>(dp.numel()));
          accumulate_grad(grads[static_cast<size_t>(ps[i])], dp);
        }
        r += lens[i];
      }
    });
  }
  return out;
}

Tensor block(Tape& t, const Tensor& a, int r0, int r1, int c0, int c1) {
  require_rank2(a, "block");
  const int m = a.rows(), n = a.cols();
  if (r0 < 0 || r1 < r0 || r1 > m || c0 < 0 || c1 < c0 || c1 > n)
    throw IndexError("block: bad range");
  const int bm = r1 - r0, bn = c1 - c0;
  Tensor out({bm, bn});
  real* o = out.mut();
  const real* src = a.data();
  for (int i = 0; i < bm; ++i)
    std::memcpy(o + static_cast<long>(i) * bn,
                src + static_cast<long>(r0 + i) * n + c0,
                sizeof(real) * static_cast<size_t>(bn));
  if (want_grad(t, {&a})) {
    const int pa = a.node;
    out.node = t.add_node(
        {pa}, [pa, m, n, r0, c0, bm, bn](const Tensor& g, GradMap& grads) {
          Tensor da({m, n});
          real* d = da.mut();
          for (int i = 0; i < bm; ++i)
            std::memcpy(d + static_cast<long>(r0 + i) * n + c0,
                        g.data() + static_cast<long>(i) * bn,
                        sizeof(real) * static_cast<size_t>(bn));
          accumulate_grad(grads[static_cast<size_t>(pa)], da);
        });
  }
  return out;
}

Tensor concat_cols(Tape& t, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: empty argument list");
  const int m = parts[0].rows();
  int n = 0;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != m) throw ShapeError("concat_cols: height mismatch");
    n += p.cols();
  }
  Tensor out({m, n});
  real* o = out.mut();
  int c = 0;
  for (const Tensor& p : parts) {
    const int pc = p.cols();
    for (int i = 0; i < m; ++i)
      std::memcpy(o + static_cast<long>(i) * n + c,
                  p.data() + static_cast<long>(i) * pc,
                  sizeof(real) * static_cast<size_t>(pc));
    c += pc;
  }
  bool any = false;
  for (const Tensor& p : parts) any = any || p.node >= 0;
  if (t.recording() && any) {
    std::vector<int> ps;
    std::vector<int> widths;
    for (const Tensor& p : parts) {
      ps.push_back(p.node);
      widths.push_back(p.cols());
    }
    out.node =
        t.add_node(ps, [ps, widths, m, n](const Tensor& g, GradMap& grads) {
          int c0 = 0;
          for (size_t i = 0; i < ps.size(); ++i) {
            const int w = widths[i];
            if (ps[i] >= 0) {
              Tensor dp({m, w});
              real* d = dp.mut();
              for (int r = 0; r < m; ++r)
                std::memcpy(d + static_cast<long>(r) * w,
                            g.data() + static_cast<long>(r) * n + c0,
                            sizeof(real) * static_cast<size_t>(w));
              accumulate_grad(grads[static_cast<size_t>(ps[i])], dp);
            }
            c0 += w;
          }
        });
  }
  return out;
}

Tensor softmax_rows(Tape& t, const Tensor& a, const Tensor* keep) {
  require_rank2(a, "softmax_rows");
  const int m = a.rows(), n = a.cols();
  std::vector<unsigned char> mask;
  if (keep) {
    if (!keep->same_shape(a)) throw ShapeError("softmax_rows: mask mismatch");
    mask.resize(static_cast<size_t>(a.numel()));
    const real* kp = keep->data();
    for (long i = 0; i < a.numel(); ++i)
      mask[static_cast<size_t>(i)] = kp[i] != real(0);
  }
  Tensor out({m, n});
  const int dead = kernels::softmax_rows(
      m, n, a.data(), mask.empty() ? nullptr : mask.data(), out.mut());
  g_dead_rows += dead;
  maybe_check_finite(out, "softmax_rows");
  if (want_grad(t, {&a})) {
    const int pa = a.node;
    out.node =
        t.add_node({pa}, [pa, out, m, n](const Tensor& g, GradMap& grads) {
          Tensor da({m, n});
          real* d = da.mut();
          const real* y = out.data();
          const real* gp = g.data();
          for (int i = 0; i < m; ++i) {
            const long off = static_cast<long>(i) * n;
            real dot = real(0);
            for (int j = 0; j < n; ++j) dot += gp[off + j] * y[off + j];
            for (int j = 0; j < n; ++j)
              d[off + j] = y[off + j] * (gp[off + j] - dot);
          }
          accumulate_grad(grads[static_cast<size_t>(pa)], da);
        });
  }
  return out;
}

Tensor layer_norm(Tape& t, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, real eps) {
  require_rank2(x, "layer_norm");
  if (eps <= real(0)) throw ContractError("layer_norm: eps must be positive");
  const int m = x.rows(), n = x.cols();
  if (gain.rank() != 1 || gain.dim(0) != n || bias.rank() != 1 ||
      bias.dim(0) != n)
    throw ShapeError("layer_norm: gain/bias width mismatch");
  Tensor out({m, n});
  Tensor mean({m});
  Tensor rstd({m});
  kernels::layer_norm_rows(m, n, x.data(), gain.data(), bias.data(), eps,
                           out.mut(), mean.mut(), rstd.mut());
  maybe_check_finite(out, "layer_norm");
  if (want_grad(t, {&x, &gain, &bias})) {
    const int px = x.node, pg = gain.node, pb = bias.node;
    out.node = t.add_node(
        {px, pg, pb},
        [x, gain, mean, rstd, px, pg, pb, m, n](const Tensor& g,
                                                GradMap& grads) {
          const real* xp = x.data();
          const real* gp = g.data();
          const real* gainp = gain.data();
          const real* mu = mean.data();
          const real* rs = rstd.data();
          Tensor dgain({n});
          Tensor dbias({n});
          real* dgp = dgain.mut();
          real* dbp = dbias.mut();
          Tensor dx_t;
          real* dx = nullptr;
          if (px >= 0) {
            dx_t = Tensor({m, n});
            dx = dx_t.mut();
          }
          for (int i = 0; i < m; ++i) {
            const long off = static_cast<long>(i) * n;
            real sum_dxhat = real(0), sum_dxhat_xhat = real(0);
            for (int j = 0; j < n; ++j) {
              const real xhat = (xp[off + j] - mu[i]) * rs[i];
              const real dyj = gp[off + j];
              dgp[j] += dyj * xhat;
              dbp[j] += dyj;
              const real dxhat = dyj * gainp[j];
              sum_dxhat += dxhat;
              sum_dxhat_xhat += dxhat * xhat;
            }
            if (dx) {
              const real inv_n = real(1) / real(n);
              for (int j = 0; j < n; ++j) {
                const real xhat = (xp[off + j] - mu[i]) * rs[i];
                const real dxhat = gp[off + j] * gainp[j];
                dx[off + j] = rs[i] * (dxhat - inv_n * sum_dxhat -
                                       xhat * inv_n * sum_dxhat_xhat);
              }
            }
          }
          if (px >= 0) accumulate_grad(grads[static_cast<size_t>(px)], dx_t);
          if (pg >= 0) accumulate_grad(grads[static_cast<size_t>(pg)], dgain);
          if (pb >= 0) accumulate_grad(grads[static_cast<size_t>(pb)], dbias);
        });
  }
  return out;
}

Tensor gelu(Tape& t, const Tensor& x) {
  Tensor out(x.shape());
  kernels::gelu(x.numel(), x.data(), out.mut());
  maybe_check_finite(out, "gelu");
  if (want_grad(t, {&x})) {
    const int px = x.node;
    out.node = t.add_node({px}, [px, x](const Tensor& g, GradMap& grads) {
      Tensor dx(x.shape());
      kernels::gelu_grad(x.numel(), x.data(), g.data(), dx.mut());
      accumulate_grad(grads[static_cast<size_t>(px)], dx);
    });
  }
  return out;
}

Tensor dropout(Tape& t, const Tensor& x, real rate, std::uint64_t seed) {
  if (rate < real(0) || rate >= real(1))
    throw ContractError("dropout: rate must lie in [0, 1)");
  if (rate == real(0)) return x;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor mask(x.shape());
  real* mp = mask.mut();
  const real keep_scale = real(1) / (real(1) - rate);
  for (long i = 0; i < x.numel(); ++i)
    mp[i] = u(rng) < static_cast<double>(rate) ? real(0) : keep_scale;
  Tensor out(x.shape());
  real* o = out.mut();
  const real* xp = x.data();
  for (long i = 0; i < x.numel(); ++i) o[i] = xp[i] * mp[i];
  if (want_grad(t, {&x})) {
    const int px = x.node;
    out.node = t.add_node({px}, [px, mask](const Tensor& g, GradMap& grads) {
      Tensor dx(g.shape());
      real* d = dx.mut();
      const real* gp = g.data();
      const real* m = mask.data();
      for (long i = 0; i < g.numel(); ++i) d[i] = gp[i] * m[i];
      accumulate_grad(grads[static_cast<size_t>(px)], dx);
    });
  }
  return out;
}

Tensor embedding_lookup(Tape& t, const Tensor& table,
                        const std::vector<int>& ids) {
  require_rank2(table, "embedding_lookup");
  const int v = table.rows(), d = table.cols();
  const int n = static_cast<int>(ids.size());
  for (int id : ids)
    if (id < 0 || id >= v) throw IndexError("embedding_lookup: id out of range");
  Tensor out({n, d});
  real* o = out.mut();
  const real* tp = table.data();
  for (int i = 0; i < n; ++i)
    std::memcpy(o + static_cast<long>(i) * d,
                tp + static_cast<long>(ids[static_cast<size_t>(i)]) * d,
                sizeof(real) * static_cast<size_t>(d));
  if (want_grad(t, {&table})) {
    const int pt = table.node;
    out.node =
        t.add_node({pt}, [pt, ids, v, d, n](const Tensor& g, GradMap& grads) {
          Tensor dt({v, d});
          real* dp = dt.mut();
          const real* gp = g.data();
          for (int i = 0; i < n; ++i) {
            real* row = dp + static_cast<long>(ids[static_cast<size_t>(i)]) * d;
            const real* gi = gp + static_cast<long>(i) * d;
            for (int j = 0; j < d; ++j) row[j] += gi[j];
          }
          accumulate_grad(grads[static_cast<size_t>(pt)], dt);
        });
  }
  return out;
}

Tensor cross_entropy_weighted(Tape& t, const Tensor& logits,
                              const std::vector<int>& targets, int pad_id,
                              const std::vector<real>& weights,
                              std::vector<real>* row_logprob) {
  require_rank2(logits, "cross_entropy");
  const int n = logits.rows(), v = logits.cols();
  if (static_cast<int>(targets.size()) != n ||
      static_cast<int>(weights.size()) != n)
    throw ShapeError("cross_entropy: row count mismatch");
  for (int i = 0; i < n; ++i) {
    const int id = targets[static_cast<size_t>(i)];
    if (id == pad_id) continue;
    if (id < 0 || id >= v)
      throw IndexError("cross_entropy: target id out of range");
  }
  if (row_logprob) row_logprob->assign(static_cast<size_t>(n), real(0));

  const real* lp = logits.data();
  double loss = 0.0;
  std::vector<real> lse(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int id = targets[static_cast<size_t>(i)];
    const long off = static_cast<long>(i) * v;
    real mx = lp[off];
    for (int j = 1; j < v; ++j) mx = std::max(mx, lp[off + j]);
    real s = real(0);
    for (int j = 0; j < v; ++j) s += std::exp(lp[off + j] - mx);
    lse[static_cast<size_t>(i)] = mx + std::log(s);
    if (id == pad_id) continue;
    const real logprob = lp[off + id] - lse[static_cast<size_t>(i)];
    if (row_logprob) (*row_logprob)[static_cast<size_t>(i)] = logprob;
    loss -= static_cast<double>(weights[static_cast<size_t>(i)]) *
            static_cast<double>(logprob);
  }
  Tensor out = Tensor::scalar(static_cast<real>(loss));
  maybe_check_finite(out, "cross_entropy");
  if (want_grad(t, {&logits})) {
    const int pl = logits.node;
    out.node = t.add_node(
        {pl}, [pl, logits, targets, weights, lse, pad_id, n, v](
                  const Tensor& g, GradMap& grads) {
          const real gs = g.item();
          Tensor dl({n, v});
          real* d = dl.mut();
          const real* lpp = logits.data();
          for (int i = 0; i < n; ++i) {
            const int id = targets[static_cast<size_t>(i)];
            if (id == pad_id) continue;
            const long off = static_cast<long>(i) * v;
            const real w = gs * weights[static_cast<size_t>(i)];
            const real z = lse[static_cast<size_t>(i)];
            for (int j = 0; j < v; ++j)
              d[off + j] = w * std::exp(lpp[off + j] - z);
            d[off + id] -= w;
          }
          accumulate_grad(grads[static_cast<size_t>(pl)], dl);
        });
  }
  return out;
}

Tensor cross_entropy(Tape& t, const Tensor& logits,
                     const std::vector<int>& targets, int pad_id) {
  const int n = logits.rows();
  if (static_cast<int>(targets.size()) != n)
    throw ShapeError("cross_entropy: row count mismatch");
  long live = 0;
  for (int id : targets)
    if (id != pad_id) ++live;
  if (live == 0) throw ContractError("cross_entropy: all positions are pad");
  std::vector<real> w(static_cast<size_t>(n), real(0));
  for (int i = 0; i < n; ++i)
    if (targets[static_cast<size_t>(i)] != pad_id)
      w[static_cast<size_t>(i)] = real(1) / static_cast<real>(live);
  return cross_entropy_weighted(t, logits, targets, pad_id, w, nullptr);
}

Tensor sum_all(Tape& t, const Tensor& a) {
  double s = 0.0;
  const real* p = a.data();
  for (long i = 0; i < a.numel(); ++i) s += static_cast<double>(p[i]);
  Tensor out = Tensor::scalar(static_cast<real>(s));
  if (want_grad(t, {&a})) {
    const int pa = a.node;
    const std::vector<int> shape = a.shape();
    out.node = t.add_node({pa}, [pa, shape](const Tensor& g, GradMap& grads) {
      accumulate_grad(grads[static_cast<size_t>(pa)],
                      Tensor::full(shape, g.item()));
    });
  }
  return out;
}

}  // namespace trice::ops
