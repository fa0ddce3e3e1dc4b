// Copyright 2026 The TOWER Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tower/tensor.hpp"

namespace tower::nn {

// A learnable tensor with its gradient and Adam moments.
template <typename T>
struct BasicParameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  BasicTensor<T> adam_m;
  BasicTensor<T> adam_v;
  bool has_grad = false;

  BasicParameter() = default;
  BasicParameter(std::string n, BasicTensor<T> v)
      : name(std::move(n)), value(std::move(v)) {}

  void zero_grad() {
    grad = BasicTensor<T>(value.shape);
    has_grad = true;
  }
};

using Parameter = BasicParameter<float>;

template <typename T>
class BasicGraph;

// Handle to a node of a BasicGraph.
template <typename T>
struct BasicVar {
  BasicGraph<T>* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const BasicTensor<T>& value() const;
  const Shape& shape() const { return value().shape; }
};

// Reverse-mode tape. Nodes are appended in evaluation order; backward()
// walks them in reverse and then adds leaf gradients into the bound
// parameters.
template <typename T>
class BasicGraph {
 public:
  using TensorT = BasicTensor<T>;
  using VarT = BasicVar<T>;
  using BackwardFn = std::function<void(BasicGraph&, int)>;

  BasicGraph() = default;
  BasicGraph(const BasicGraph&) = delete;
  BasicGraph& operator=(const BasicGraph&) = delete;

  VarT input(TensorT value);
  VarT param(BasicParameter<T>& p);
  // Appends an op result. Throws NumericError if `value` has non-finite
  // entries.
  VarT record(const char* op, TensorT value, std::vector<VarT> parents, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be a scalar node
  // of this graph; a graph supports one backward pass.
  void backward(VarT loss);

  const TensorT& value(VarT v) const;
  // Gradient of a node after backward(); zeros if the node was not reached.
  const TensorT& grad(VarT v);

  const TensorT& value_of(int id) const { return nodes_[id].value; }
  TensorT& grad_of(int id);
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  int parent(int id, int k) const { return nodes_[id].parents[k]; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op = "";
    TensorT value;
    TensorT grad;
    std::vector<int> parents;
    BackwardFn backward;
    BasicParameter<T>* param = nullptr;
    bool requires_grad = false;
  };
  void check(VarT v) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

using Graph = BasicGraph<float>;
using Var = BasicVar<float>;

namespace ops {

// 2-D convolution, stride 1, zero padding `pad`. x: N x Cin x H x W,
// weight: Cout x Cin x K x K, bias: 1 x Cout.
template <typename T>
BasicVar<T> conv2d(BasicVar<T> x, BasicVar<T> weight, BasicVar<T> bias, int pad);

// x: N x Din, weight: Dout x Din, bias: 1 x Dout.
template <typename T>
BasicVar<T> dense(BasicVar<T> x, BasicVar<T> weight, BasicVar<T> bias);

// a: N x E, b: M x E -> N x M (a times b transposed).
template <typename T>
BasicVar<T> matmul_nt(BasicVar<T> a, BasicVar<T> b);

// 2x2 max pooling, stride 2; H and W must be even. First maximum wins.
template <typename T>
BasicVar<T> max_pool2(BasicVar<T> x);

// Nearest-neighbour 2x upsampling.
template <typename T>
BasicVar<T> upsample2(BasicVar<T> x);

template <typename T>
BasicVar<T> concat_channels(BasicVar<T> a, BasicVar<T> b);

// Stacks along the batch axis.
template <typename T>
BasicVar<T> concat_batch(BasicVar<T> a, BasicVar<T> b);

template <typename T>
BasicVar<T> relu(BasicVar<T> x);

template <typename T>
BasicVar<T> sigmoid(BasicVar<T> x);

// N x C x H x W -> N x C.
template <typename T>
BasicVar<T> global_avg_pool(BasicVar<T> x);

// Row-wise x / ||x||. A zero row raises NumericError.
template <typename T>
BasicVar<T> l2_normalize_rows(BasicVar<T> x);

template <typename T>
BasicVar<T> scale(BasicVar<T> x, T s);

template <typename T>
BasicVar<T> add(BasicVar<T> a, BasicVar<T> b);

template <typename T>
BasicVar<T> sum(BasicVar<T> x);

// Mean over rows of -log softmax(logits)[target]. Column `excluded[i]`
// (when >= 0) is removed from row i's softmax.
template <typename T>
BasicVar<T> softmax_cross_entropy(BasicVar<T> logits, const std::vector<int>& targets,
                                  const std::vector<int>& excluded = {});

// Sum over images of the per-image mean squared error.
template <typename T>
BasicVar<T> mse_image_sum(BasicVar<T> prediction, BasicVar<T> target);

// Mean binary cross-entropy over all elements, computed from logits.
template <typename T>
BasicVar<T> bce_with_logits(BasicVar<T> logits, BasicVar<T> target);

}  // namespace ops
}  // namespace tower::nn
