#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "finegrain/common.hpp"

namespace finegrain {

// Dense 64-bit float tensor, row-major, rank 1..3. NN code keeps activations
// as [B, C, N]; rank-2 inputs are treated as an implicit batch of one where a
// primitive needs it.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until backward touches this tensor
  bool requires_grad = false;

  size_t size() const { return values.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape, double fill = 0.0, bool requires_grad = false);
TensorPtr tensor_from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
std::string shape_str(const std::vector<int>& shape);
size_t shape_numel(const std::vector<int>& shape);
bool all_finite(const Tensor& t);

// Reverse-mode tape. Primitives append one node each; backward replays the
// nodes in reverse. Tensors produced on the tape get their grads cleared at
// the start of every backward pass so leaf (parameter/input) grads accumulate
// across passes exactly.
class Tape {
 public:
  TensorPtr record(const char* op, TensorPtr out, std::function<void()> backward);
  void backward(const TensorPtr& loss);
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
  std::vector<TensorPtr> produced_;
  const Tensor* terminal_ = nullptr;
};

// Batch-norm learnables plus running statistics. The running buffers live in
// a ParamStore as non-trainable entries so checkpoints carry them.
struct BatchNormState {
  TensorPtr gamma;         // [C]
  TensorPtr beta;          // [C]
  TensorPtr running_mean;  // [C], buffer
  TensorPtr running_var;   // [C], buffer
  double momentum = 0.1;
  double eps = 1e-5;
};

// --- primitives -------------------------------------------------------------

// [m,k]x[k,n] -> [m,n]; or batched [B,m,k]x[B,k,n] -> [B,m,n].
TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b);

// x:[B,C_in,L] (or [C_in,L]), w:[C_out,C_in,k] (k odd), bias:[C_out].
// Cross-correlation, stride 1, symmetric zero padding.
TensorPtr conv1d(Tape& tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias,
                 int padding);

// Softmax over the last axis, independently per leading row, computed with
// max subtraction. When valid_len is non-empty it must hold one entry per
// leading row; positions >= valid_len are exactly zero in the output.
TensorPtr softmax_last(Tape& tape, const TensorPtr& x, const std::vector<int>& valid_len = {});

TensorPtr batch_norm(Tape& tape, const TensorPtr& x, BatchNormState& bn, bool train);

// Normalizes over the channel axis per sample position; gain/bias are [C].
TensorPtr layer_norm(Tape& tape, const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias,
                     double eps = 1e-5);

TensorPtr relu(Tape& tape, const TensorPtr& x);

// Inverted-scaling dropout; exact identity when !train or rate == 0 (the RNG
// is not consulted in either case).
TensorPtr dropout(Tape& tape, const TensorPtr& x, double rate, bool train, Rng& rng);

// [B,C,L] -> [B,1,C] (or [C,L] -> [1,C]) keeping the per-channel maximum;
// ties break toward the lowest index and the gradient routes there only.
TensorPtr max_pool_length(Tape& tape, const TensorPtr& x);

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b);

// x:[B,n] + bias:[n], broadcast over rows.
TensorPtr add_bias_rows(Tape& tape, const TensorPtr& x, const TensorPtr& bias);

TensorPtr concat_last(Tape& tape, const TensorPtr& a, const TensorPtr& b);

// [B,C,1] -> [B,C,n]; backward sums over replicas.
TensorPtr replicate_length(Tape& tape, const TensorPtr& x, int n);

// [B,1,F] -> [B,c,F]; backward sums over replicas.
TensorPtr replicate_channels(Tape& tape, const TensorPtr& x, int c);

// [B,C,N] -> [B,N,C] (or [C,N] -> [N,C]).
TensorPtr transpose_cn(Tape& tape, const TensorPtr& x);

TensorPtr zero_pad_last(Tape& tape, const TensorPtr& x, int target);
TensorPtr slice_last(Tape& tape, const TensorPtr& x, int keep);
TensorPtr reshape_copy(Tape& tape, const TensorPtr& x, std::vector<int> shape);

// Mean over all entries of the sigmoid-fused binary cross entropy.
TensorPtr bce_with_logits_mean(Tape& tape, const TensorPtr& logits, const TensorPtr& targets);

TensorPtr sum_all(Tape& tape, const TensorPtr& x);
TensorPtr take_scalar(Tape& tape, const TensorPtr& x, size_t flat_index);

}  // namespace finegrain
