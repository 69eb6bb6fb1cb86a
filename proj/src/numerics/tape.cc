#include "hit/numerics/tape.h"

#include "hit/error.h"

namespace hit {

template <typename T>
std::size_t ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (find(name)) throw ContractError("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

template <typename T>
std::optional<std::size_t> ParameterSet<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

template <typename T>
std::size_t ParameterSet<T>::index(const std::string& name) const {
  auto i = find(name);
  if (!i) throw ContractError("unknown parameter: " + name);
  return *i;
}

template <typename T>
std::size_t ParameterSet<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  return record(std::move(value), {}, nullptr, "constant");
}

template <typename T>
Var Tape<T>::parameter(Tensor<T> value, std::size_t param_index) {
  Var v = record(std::move(value), {}, nullptr, "parameter");
  nodes_.back().requires_grad = true;
  nodes_.back().param_index = param_index;
  return v;
}

template <typename T>
std::vector<Var> Tape<T>::parameters(const ParameterSet<T>& params) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(parameter(params.value(i), i));
  return vars;
}

template <typename T>
std::vector<Var> Tape<T>::constants(const ParameterSet<T>& params) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(constant(params.value(i)));
  return vars;
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, std::vector<Edge> inputs, BackwardFn backward,
                    const char* op) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  bool requires_grad = false;
  for (const Edge& e : inputs) {
    if (e.input.id >= id) throw ContractError("tape input recorded out of order");
    if (!e.stop_gradient && nodes_[e.input.id].requires_grad) requires_grad = true;
  }
  Node node;
  node.value = std::move(value);
  node.inputs = std::move(inputs);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  node.op = op;
  nodes_.push_back(std::move(node));
  return Var{id};
}

template <typename T>
Tensor<T>& Tape<T>::grad(Var v) {
  Tensor<T>& g = grads_.at(v.id);
  if (g.empty()) g = Tensor<T>(nodes_[v.id].value.shape());
  return g;
}

template <typename T>
Tensor<T> Tape<T>::stop_gradient_value(const Tensor<T>& live) {
  if (sg_source_) {
    if (sg_next_ >= sg_source_->size()) {
      throw ContractError("stop-gradient replay ran out of recorded values");
    }
    const Tensor<T>& frozen = (*sg_source_)[sg_next_++];
    if (frozen.shape() != live.shape()) {
      throw ContractError("stop-gradient replay: recorded shape " + shape_string(frozen.shape()) +
                          " does not match " + shape_string(live.shape()));
    }
    return frozen;
  }
  if (sg_sink_) sg_sink_->push_back(live);
  return live;
}

template <typename T>
std::vector<Tensor<T>> Tape<T>::backward(Var loss, std::size_t num_params) {
  if (loss.id >= nodes_.size()) throw ContractError("loss is not a node of this tape");
  if (nodes_[loss.id].value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(nodes_[loss.id].value.shape()));
  }
  grads_.assign(nodes_.size(), Tensor<T>());
  grad(loss)[0] = T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || grads_[i].empty()) continue;
    node.backward(*this, grads_[i]);
  }

  std::vector<Tensor<T>> out(num_params);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (!node.param_index) continue;
    const std::size_t p = *node.param_index;
    if (p >= num_params) throw ContractError("parameter index out of range in backward()");
    Tensor<T> g = grads_[i].empty() ? Tensor<T>(node.value.shape()) : grads_[i];
    if (out[p].empty()) {
      out[p] = std::move(g);
    } else {
      auto dst = out[p].data();
      auto src = g.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  grads_.clear();
  return out;
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace hit
