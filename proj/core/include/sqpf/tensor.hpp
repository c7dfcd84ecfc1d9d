#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sqpf/grid.hpp"

namespace sqpf {

// Reverse-mode autodiff over dense double tensors. Graphs are built
// per-episode and freed when the handles go out of scope; there is no global
// tape, so independent graphs are safe to evaluate from parallel workers.
//
// Shapes used throughout: feature maps are {C,H,W}, prototypes {C},
// similarity/probability maps {H,W}, scalars {1}.
class Tensor {
 public:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;  // allocated on demand
    std::vector<int> shape;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents

    std::vector<double>& ensure_grad() {
      if (grad.empty()) grad.assign(value.size(), 0.0);
      return grad;
    }
  };

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double fill, bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor from_grid(const RealGrid& g, bool requires_grad = false);  // shape {H,W}

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  size_t size() const { return node_->value.size(); }
  int dim(int i) const { return node_->shape[i]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }

  double* data() { return node_->value.data(); }
  const double* data() const { return node_->value.data(); }
  std::vector<double>& values() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }

  double scalar() const;  // value of a {1} tensor

  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::vector<double>& grad() const { return node_->grad; }
  std::vector<double>& mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { if (node_ && !node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0); }

  // A value copy cut off from the graph.
  Tensor detach() const;

  RealGrid to_grid() const;  // rank-2 tensors only

  std::shared_ptr<Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

// While alive, newly created ops do not record backward closures.
// Thread-local, nestable.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// Backpropagate from a scalar root: seeds d(root)/d(root)=1 and accumulates
// gradients into every reachable tensor with requires_grad.
void backward(const Tensor& root);

// --- primitive ops -----------------------------------------------------

// y = a*x + b*z, elementwise; shapes must match.
Tensor linear2(double a, const Tensor& x, double b, const Tensor& z);

// y = a*x + b, elementwise.
Tensor affine(const Tensor& x, double a, double b);

// Mean of equally-shaped tensors.
Tensor mean_of(const std::vector<Tensor>& xs);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// 2D convolution, NCHW without the batch dim: x {Cin,H,W}, w {Cout,Cin,kh,kw},
// b {Cout}. Zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

// Per-channel normalization over the spatial extent with learnable scale and
// shift: y_c = gamma_c * (x_c - mean_c)/sqrt(var_c + eps) + beta_c.
// Variance is the biased (1/N) estimate.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     double eps = 1e-5);

// Mask-weighted spatial mean of a feature map: f {C,H,W}, mask {H,W} constant.
// p_c = sum_xy f_c(x,y) * m(x,y) / sum_xy m(x,y). Errors on zero-mass masks.
Tensor map_pool(const Tensor& f, const RealGrid& mask);

// Per-pixel cosine similarity between feature columns and a prototype:
// f {C,H,W}, p {C} -> {H,W}. Errors when p or any pixel feature has zero norm.
Tensor cosine_map(const Tensor& f, const Tensor& p);

// Pixel-mean binary cross-entropy of sigmoid(z) against targets in [0,1],
// computed from the logits for stability: mean(softplus(z) - t*z).
Tensor bce_with_logits_mean(const Tensor& z, const RealGrid& target);

// Scalar sum of squared entries.
Tensor sum_of_squares(const Tensor& x);

}  // namespace sqpf
