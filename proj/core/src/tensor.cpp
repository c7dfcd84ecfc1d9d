#include "sqpf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

namespace sqpf {

namespace {

thread_local int g_no_grad_depth = 0;

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DataError("tensor shape with non-positive dim");
    n *= static_cast<size_t>(d);
  }
  return n;
}

std::shared_ptr<Tensor::Node> new_node(std::vector<int> shape, std::vector<double> values,
                                       bool requires_grad) {
  auto n = std::make_shared<Tensor::Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

// Wire up a result node: value already computed; record parents + closure only
// when grad mode is on and some parent needs gradients.
Tensor make_result(std::vector<int> shape, std::vector<double> value,
                   std::initializer_list<const Tensor*> parents,
                   std::function<void(Tensor::Node&)> backward_fn) {
  auto node = new_node(std::move(shape), std::move(value), false);
  if (grad_enabled() && any_requires_grad(parents)) {
    node->requires_grad = true;
    for (const Tensor* p : parents) node->parents.push_back(p->node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

double stable_softplus(double z) {
  // log(1 + e^z) without overflow
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double stable_sigmoid(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0; }

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  const size_t n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, double fill, bool requires_grad) {
  const size_t n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, fill), requires_grad));
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values,
                           bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw DataError("from_values: shape/value count mismatch");
  return Tensor(new_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::from_grid(const RealGrid& g, bool requires_grad) {
  return Tensor(new_node({g.rows(), g.cols()}, g.raw(), requires_grad));
}

double Tensor::scalar() const {
  if (!node_ || node_->value.size() != 1) throw DataError("scalar() on non-scalar tensor");
  return node_->value[0];
}

Tensor Tensor::detach() const {
  if (!node_) return Tensor();
  return Tensor(new_node(node_->shape, node_->value, false));
}

RealGrid Tensor::to_grid() const {
  if (rank() != 2) throw DataError("to_grid: tensor is not rank-2");
  RealGrid g(dim(0), dim(1));
  g.raw() = node_->value;
  return g;
}

void backward(const Tensor& root) {
  if (!root.defined() || root.size() != 1)
    throw DataError("backward: root must be a defined scalar");
  if (!root.requires_grad()) return;

  // Topological order via iterative post-order DFS.
  std::vector<Tensor::Node*> order;
  std::unordered_set<Tensor::Node*> visited;
  std::vector<std::pair<Tensor::Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Tensor::Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor::Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// --- elementwise ---------------------------------------------------------

Tensor linear2(double a, const Tensor& x, double b, const Tensor& z) {
  if (x.shape() != z.shape()) throw DataError("linear2: shape mismatch");
  std::vector<double> v(x.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a * x.values()[i] + b * z.values()[i];
  auto xn = x.node(), zn = z.node();
  return make_result(x.shape(), std::move(v), {&x, &z}, [a, b, xn, zn](Tensor::Node& out) {
    if (xn->requires_grad) {
      auto& g = xn->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += a * out.grad[i];
    }
    if (zn->requires_grad) {
      auto& g = zn->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += b * out.grad[i];
    }
  });
}

Tensor affine(const Tensor& x, double a, double b) {
  std::vector<double> v(x.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a * x.values()[i] + b;
  auto xn = x.node();
  return make_result(x.shape(), std::move(v), {&x}, [a, xn](Tensor::Node& out) {
    auto& g = xn->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += a * out.grad[i];
  });
}

Tensor mean_of(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw DataError("mean_of: empty input");
  for (const auto& t : xs)
    if (t.shape() != xs.front().shape()) throw DataError("mean_of: shape mismatch");
  const double inv = 1.0 / xs.size();
  std::vector<double> v(xs.front().size(), 0.0);
  for (const auto& t : xs)
    for (size_t i = 0; i < v.size(); ++i) v[i] += t.values()[i];
  for (double& e : v) e *= inv;

  auto node = new_node(xs.front().shape(), std::move(v), false);
  bool needs = false;
  if (grad_enabled())
    for (const auto& t : xs) needs = needs || t.requires_grad();
  if (needs) {
    node->requires_grad = true;
    std::vector<std::shared_ptr<Tensor::Node>> parents;
    for (const auto& t : xs) parents.push_back(t.node());
    node->parents = parents;
    node->backward_fn = [parents, inv](Tensor::Node& out) {
      for (auto& p : parents) {
        if (!p->requires_grad) continue;
        auto& g = p->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += inv * out.grad[i];
      }
    };
  }
  return Tensor(std::move(node));
}

Tensor relu(const Tensor& x) {
  std::vector<double> v(x.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = x.values()[i] > 0 ? x.values()[i] : 0.0;
  auto xn = x.node();
  return make_result(x.shape(), std::move(v), {&x}, [xn](Tensor::Node& out) {
    auto& g = xn->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i)
      if (xn->value[i] > 0) g[i] += out.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> v(x.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = stable_sigmoid(x.values()[i]);
  auto xn = x.node();
  return make_result(x.shape(), std::move(v), {&x}, [xn](Tensor::Node& out) {
    auto& g = xn->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      const double s = out.value[i];
      g[i] += s * (1.0 - s) * out.grad[i];
    }
  });
}

// --- conv / norm ----------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1)
    throw DataError("conv2d: expected x{Cin,H,W}, w{Cout,Cin,kh,kw}, b{Cout}");
  const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin) throw DataError("conv2d: channel mismatch");
  if (b.dim(0) != cout) throw DataError("conv2d: bias size mismatch");
  if (stride < 1) throw DataError("conv2d: stride < 1");
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (wd + 2 * pad - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw DataError("conv2d: output would be empty");

  std::vector<double> out(static_cast<size_t>(cout) * oh * ow, 0.0);
  const double* xv = x.data();
  const double* wv = w.data();
  const double* bv = b.data();
  for (int co = 0; co < cout; ++co) {
    double* oplane = out.data() + static_cast<size_t>(co) * oh * ow;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) oplane[oy * ow + ox] = bv[co];
    for (int ci = 0; ci < cin; ++ci) {
      const double* xplane = xv + static_cast<size_t>(ci) * h * wd;
      const double* wk = wv + ((static_cast<size_t>(co) * cin + ci) * kh) * kw;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const double wgt = wk[ky * kw + kx];
          if (wgt == 0.0) continue;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            double* orow = oplane + oy * ow;
            const double* xrow = xplane + iy * wd;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= wd) continue;
              orow[ox] += wgt * xrow[ix];
            }
          }
        }
      }
    }
  }

  auto xn = x.node(), wn = w.node(), bn = b.node();
  return make_result(
      {cout, oh, ow}, std::move(out), {&x, &w, &b},
      [=](Tensor::Node& o) {
        const double* go = o.grad.data();
        for (int co = 0; co < cout; ++co) {
          const double* gplane = go + static_cast<size_t>(co) * oh * ow;
          if (bn->requires_grad) {
            double s = 0.0;
            for (int i = 0; i < oh * ow; ++i) s += gplane[i];
            bn->ensure_grad()[co] += s;
          }
          for (int ci = 0; ci < cin; ++ci) {
            const double* xplane = xn->value.data() + static_cast<size_t>(ci) * h * wd;
            double* gx = xn->requires_grad
                             ? xn->ensure_grad().data() + static_cast<size_t>(ci) * h * wd
                             : nullptr;
            const size_t wbase = ((static_cast<size_t>(co) * cin + ci) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
              for (int kx = 0; kx < kw; ++kx) {
                const double wgt = wn->value[wbase + ky * kw + kx];
                double wgrad = 0.0;
                for (int oy = 0; oy < oh; ++oy) {
                  const int iy = oy * stride + ky - pad;
                  if (iy < 0 || iy >= h) continue;
                  const double* grow = gplane + oy * ow;
                  const double* xrow = xplane + iy * wd;
                  double* gxrow = gx ? gx + iy * wd : nullptr;
                  for (int ox = 0; ox < ow; ++ox) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= wd) continue;
                    wgrad += grow[ox] * xrow[ix];
                    if (gxrow) gxrow[ix] += wgt * grow[ox];
                  }
                }
                if (wn->requires_grad) wn->ensure_grad()[wbase + ky * kw + kx] += wgrad;
              }
            }
          }
        }
      });
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() != 3) throw DataError("instance_norm: expected {C,H,W}");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c)
    throw DataError("instance_norm: gamma/beta size mismatch");
  const int n = h * w;
  const double invn = 1.0 / n;

  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());   // normalized pre-scale values, reused in backward
  std::vector<double> istd(c);
  for (int ci = 0; ci < c; ++ci) {
    const double* xp = x.data() + static_cast<size_t>(ci) * n;
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += xp[i];
    mean *= invn;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (xp[i] - mean) * (xp[i] - mean);
    var *= invn;
    const double is = 1.0 / std::sqrt(var + eps);
    istd[ci] = is;
    const double g = gamma.values()[ci], bta = beta.values()[ci];
    double* op = out.data() + static_cast<size_t>(ci) * n;
    double* hp = xhat.data() + static_cast<size_t>(ci) * n;
    for (int i = 0; i < n; ++i) {
      hp[i] = (xp[i] - mean) * is;
      op[i] = g * hp[i] + bta;
    }
  }

  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_result(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [=, xhat = std::move(xhat), istd = std::move(istd)](Tensor::Node& o) {
        for (int ci = 0; ci < c; ++ci) {
          const double* go = o.grad.data() + static_cast<size_t>(ci) * n;
          const double* hp = xhat.data() + static_cast<size_t>(ci) * n;
          double sum_g = 0.0, sum_gh = 0.0;
          for (int i = 0; i < n; ++i) {
            sum_g += go[i];
            sum_gh += go[i] * hp[i];
          }
          if (bn->requires_grad) bn->ensure_grad()[ci] += sum_g;
          if (gn->requires_grad) gn->ensure_grad()[ci] += sum_gh;
          if (xn->requires_grad) {
            double* gx = xn->ensure_grad().data() + static_cast<size_t>(ci) * n;
            const double k = gn->value[ci] * istd[ci];
            const double mg = sum_g * invn, mgh = sum_gh * invn;
            for (int i = 0; i < n; ++i) gx[i] += k * (go[i] - mg - hp[i] * mgh);
          }
        }
      });
}

// --- pooling / similarity ---------------------------------------------------

Tensor map_pool(const Tensor& f, const RealGrid& mask) {
  if (f.rank() != 3) throw DataError("map_pool: expected feature map {C,H,W}");
  const int c = f.dim(0), h = f.dim(1), w = f.dim(2);
  if (mask.rows() != h || mask.cols() != w)
    throw DataError("map_pool: mask shape " + std::to_string(mask.rows()) + "x" +
                    std::to_string(mask.cols()) + " does not match feature grid " +
                    std::to_string(h) + "x" + std::to_string(w));
  double mass = 0.0;
  for (double v : mask.raw()) mass += v;
  if (!(mass > 0.0)) throw DataError("map_pool: zero-mass mask");
  const double inv_mass = 1.0 / mass;
  const int n = h * w;

  std::vector<double> out(c, 0.0);
  for (int ci = 0; ci < c; ++ci) {
    const double* fp = f.data() + static_cast<size_t>(ci) * n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += fp[i] * mask.raw()[i];
    out[ci] = s * inv_mass;
  }

  auto fn = f.node();
  const std::vector<double> mvals = mask.raw();
  return make_result({c}, std::move(out), {&f}, [=](Tensor::Node& o) {
    auto& gf = fn->ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      const double g = o.grad[ci] * inv_mass;
      double* gp = gf.data() + static_cast<size_t>(ci) * n;
      for (int i = 0; i < n; ++i) gp[i] += g * mvals[i];
    }
  });
}

Tensor cosine_map(const Tensor& f, const Tensor& p) {
  if (f.rank() != 3 || p.rank() != 1) throw DataError("cosine_map: expected f{C,H,W}, p{C}");
  const int c = f.dim(0), h = f.dim(1), w = f.dim(2);
  if (p.dim(0) != c) throw DataError("cosine_map: channel mismatch");
  const int n = h * w;

  double pnorm2 = 0.0;
  for (int ci = 0; ci < c; ++ci) {
    const double v = p.values()[ci];
    if (!std::isfinite(v)) throw NumericError("cosine_map: non-finite prototype entry");
    pnorm2 += v * v;
  }
  if (pnorm2 == 0.0) throw NumericError("cosine_map: zero-norm prototype");
  const double pnorm = std::sqrt(pnorm2);

  std::vector<double> fnorm(n);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double dot = 0.0, fn2 = 0.0;
    for (int ci = 0; ci < c; ++ci) {
      const double fv = f.values()[static_cast<size_t>(ci) * n + i];
      dot += fv * p.values()[ci];
      fn2 += fv * fv;
    }
    if (fn2 == 0.0)
      throw NumericError("cosine_map: zero-norm feature vector at pixel " + std::to_string(i));
    fnorm[i] = std::sqrt(fn2);
    out[i] = dot / (fnorm[i] * pnorm);
  }

  auto fn_ = f.node(), pn_ = p.node();
  return make_result(
      {h, w}, std::move(out), {&f, &p},
      [=, fnorm = std::move(fnorm)](Tensor::Node& o) {
        // ds/df = p/(|f||p|) - s f/|f|^2 ; ds/dp = f/(|f||p|) - s p/|p|^2
        for (int i = 0; i < n; ++i) {
          const double g = o.grad[i];
          if (g == 0.0) continue;
          const double s = o.value[i];
          const double inv_fp = 1.0 / (fnorm[i] * pnorm);
          const double inv_ff = 1.0 / (fnorm[i] * fnorm[i]);
          for (int ci = 0; ci < c; ++ci) {
            const size_t fi = static_cast<size_t>(ci) * n + i;
            const double fv = fn_->value[fi];
            const double pv = pn_->value[ci];
            if (fn_->requires_grad)
              fn_->ensure_grad()[fi] += g * (pv * inv_fp - s * fv * inv_ff);
            if (pn_->requires_grad)
              pn_->ensure_grad()[ci] += g * (fv * inv_fp - s * pv / pnorm2);
          }
        }
      });
}

Tensor bce_with_logits_mean(const Tensor& z, const RealGrid& target) {
  if (z.rank() != 2) throw DataError("bce_with_logits_mean: expected {H,W} logits");
  if (target.rows() != z.dim(0) || target.cols() != z.dim(1))
    throw DataError("bce_with_logits_mean: target shape mismatch");
  const size_t n = z.size();
  for (double t : target.raw())
    if (t < 0.0 || t > 1.0) throw DataError("bce_with_logits_mean: target outside [0,1]");

  double loss = 0.0;
  for (size_t i = 0; i < n; ++i)
    loss += stable_softplus(z.values()[i]) - target.raw()[i] * z.values()[i];
  loss /= static_cast<double>(n);

  auto zn = z.node();
  const std::vector<double> tv = target.raw();
  return make_result({1}, {loss}, {&z}, [=](Tensor::Node& o) {
    const double g = o.grad[0] / static_cast<double>(n);
    auto& gz = zn->ensure_grad();
    for (size_t i = 0; i < n; ++i) gz[i] += g * (stable_sigmoid(zn->value[i]) - tv[i]);
  });
}

Tensor sum_of_squares(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  auto xn = x.node();
  return make_result({1}, {s}, {&x}, [=](Tensor::Node& o) {
    auto& g = xn->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * xn->value[i] * o.grad[0];
  });
}

}  // namespace sqpf
