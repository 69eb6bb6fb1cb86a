#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hit/numerics/tensor.h"

namespace hit {

// Handle to a node on a Tape. Only meaningful for the tape that produced it.
struct Var {
  std::uint32_t id = 0;
};

// Named, ordered collection of learnable tensors. The index of a parameter is
// its identity on tapes, in gradients, and in checkpoints.
template <typename T>
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor<T> value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor<T>& value(std::size_t i) const { return values_[i]; }
  Tensor<T>& value(std::size_t i) { return values_[i]; }
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t index(const std::string& name) const;  // throws when absent
  std::size_t element_count() const;

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i].template cast<U>());
    return out;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
};

// Single-threaded record of executed primitives for reverse-mode
// differentiation. Nodes are appended in execution order, so every node's
// inputs precede it and a reverse sweep is a valid topological traversal.
template <typename T>
class Tape {
 public:
  // Accumulates gradient contributions into the node's inputs. Receives the
  // tape and the gradient of the node's own output.
  using BackwardFn = std::function<void(Tape&, const Tensor<T>&)>;

  struct Edge {
    Var input;
    bool stop_gradient = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> value);
  // Leaf that receives a gradient slot in backward() under `param_index`.
  Var parameter(Tensor<T> value, std::size_t param_index);
  // Registers every tensor of `params` as a parameter leaf, in order.
  std::vector<Var> parameters(const ParameterSet<T>& params);
  // Registers every tensor of `params` as a constant (inference, no gradients).
  std::vector<Var> constants(const ParameterSet<T>& params);

  // Appends a computed node. Throws NumericError when `value` holds NaN/Inf.
  Var record(Tensor<T> value, std::vector<Edge> inputs, BackwardFn backward,
             const char* op);

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  const std::vector<Edge>& inputs(Var v) const { return nodes_.at(v.id).inputs; }
  const char* op(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient buffer of `v` during backward(), zero-initialized on first use.
  Tensor<T>& grad(Var v);

  // Reverse sweep from a one-element `loss`. Returns one gradient per
  // parameter index in [0, num_params): parameters registered on this tape get
  // their accumulated gradient (exact zeros when unreachable), parameters never
  // registered get an empty tensor.
  std::vector<Tensor<T>> backward(Var loss, std::size_t num_params);

  // Finite-difference checks need the stop-gradient outputs of the base point
  // held fixed: one tape records them in call order, later tapes replay them.
  void record_stop_gradients(std::vector<Tensor<T>>* sink) { sg_sink_ = sink; }
  void replay_stop_gradients(const std::vector<Tensor<T>>* source) {
    sg_source_ = source;
    sg_next_ = 0;
  }
  // Value a stop_gradient node should carry given its live input.
  Tensor<T> stop_gradient_value(const Tensor<T>& live);

 private:
  struct Node {
    Tensor<T> value;
    std::vector<Edge> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::optional<std::size_t> param_index;
    const char* op = "";
  };

  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
  std::vector<Tensor<T>>* sg_sink_ = nullptr;
  const std::vector<Tensor<T>>* sg_source_ = nullptr;
  std::size_t sg_next_ = 0;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace hit
