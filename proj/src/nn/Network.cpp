#include "lungnet/nn/Network.h"

#include "lungnet/common/Errors.h"

namespace lungnet::nn {

Network::Network(const Network& other) : architecture_(other.architecture_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) {
    layers_.push_back(l->clone());
  }
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Network::add(std::unique_ptr<Layer> layer, int stage) {
  if (stage < 1 || stage > 3) {
    throw ArgumentError("stage must be 1, 2 or 3");
  }
  if (!layers_.empty() && layers_.back()->stage() > stage) {
    throw ArgumentError("stages must appear in order 1, 2, 3");
  }
  layer->setStage(stage);
  layers_.push_back(std::move(layer));
}

Tensor Network::run(const Tensor& input, const ForwardContext& ctx, std::size_t count) {
  Tensor x = input;
  for (std::size_t i = 0; i < count; ++i) {
    x = layers_[i]->forward(x, ctx);
  }
  executed_ = count;
  return x;
}

Tensor Network::forward(const Tensor& input, const ForwardContext& ctx) {
  return run(input, ctx, layers_.size());
}

Tensor Network::forwardLogits(const Tensor& input, const ForwardContext& ctx) {
  std::size_t count = layers_.size();
  if (count > 0 && layers_.back()->kind() == LayerKind::Softmax) {
    --count;
  }
  return run(input, ctx, count);
}

Tensor Network::backward(const Tensor& gradOutput) {
  if (executed_ == 0 && !layers_.empty()) {
    throw StateError("network backward called before forward");
  }
  Tensor g = gradOutput;
  for (std::size_t i = executed_; i-- > 0;) {
    g = layers_[i]->backward(g);
  }
  executed_ = 0;
  return g;
}

std::vector<Tensor*> Network::trainableParameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    if (!l->trainable()) {
      continue;
    }
    for (auto& p : l->params()) {
      out.push_back(&p.value);
    }
  }
  return out;
}

void Network::zeroGrad() {
  for (auto& l : layers_) {
    l->zeroGrad();
  }
}

void Network::setStageTrainable(int stage, bool trainable) {
  for (auto& l : layers_) {
    if (l->stage() == stage) {
      l->setTrainable(trainable);
    }
  }
}

void Network::reinitializeStage(int stage, std::mt19937_64& rng) {
  for (auto& l : layers_) {
    if (l->stage() == stage) {
      l->initialize(rng);
    }
  }
}

Shape Network::outputShape(const Shape& input) const {
  Shape s = input;
  for (const auto& l : layers_) {
    s = l->outputShape(s);
  }
  return s;
}

std::vector<int> argmaxRows(const Tensor& scores) {
  if (scores.rank() != 2) {
    throw DimensionError("argmaxRows expects [B,K]");
  }
  const std::size_t rows = scores.dim(0), k = scores.dim(1);
  std::vector<int> out(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (scores[r * k + j] > scores[r * k + best]) {
        best = j;
      }
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

} // namespace lungnet::nn
