#include "lungnet/nn/Layer.h"

#include <algorithm>
#include <sstream>

#include "lungnet/common/Errors.h"

namespace lungnet::nn {

std::string layerKindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d:
      return "conv2d";
    case LayerKind::BatchNorm:
      return "batchnorm";
    case LayerKind::MaxPool2d:
      return "maxpool2d";
    case LayerKind::Activation:
      return "activation";
    case LayerKind::BiLstm:
      return "bilstm";
    case LayerKind::Dense:
      return "dense";
    case LayerKind::Dropout:
      return "dropout";
    case LayerKind::Softmax:
      return "softmax";
    case LayerKind::SequenceFromMaps:
      return "sequence_from_maps";
    case LayerKind::FinalStates:
      return "final_states";
  }
  return "unknown";
}

Tensor& Layer::param(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) {
      return p.value;
    }
  }
  throw ArgumentError("no parameter named '" + name + "'");
}

const Tensor& Layer::param(const std::string& name) const {
  return const_cast<Layer*>(this)->param(name);
}

std::size_t Layer::paramCount() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    n += p.value.size();
  }
  return n;
}

void Layer::setTrainable(bool trainable) {
  trainable_ = trainable;
  if (!trainable) {
    for (auto& p : params_) {
      p.value.clearGrad();
    }
  }
}

void Layer::zeroGrad() {
  for (auto& p : params_) {
    if (trainable_) {
      p.value.zeroGrad();
    } else {
      p.value.clearGrad();
    }
  }
}

void Layer::requireCache(bool present) const {
  if (!present) {
    throw StateError(layerKindName(kind()) + ": backward called before forward");
  }
}

std::span<double> Layer::gradOf(std::size_t paramIndex) {
  auto& t = params_.at(paramIndex).value;
  if (!t.hasGrad()) {
    t.zeroGrad();
  }
  return t.grad();
}

namespace {

std::map<std::string, std::string> parseDescriptor(const std::string& text, std::string& kind) {
  std::istringstream ss(text);
  ss >> kind;
  std::map<std::string, std::string> kv;
  std::string token;
  while (ss >> token) {
    auto eq = token.find('=');
    if (eq == std::string::npos) {
      throw FormatError("malformed layer descriptor token '" + token + "'");
    }
    kv[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return kv;
}

std::size_t getSize(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw FormatError("layer descriptor missing '" + key + "'");
  }
  return static_cast<std::size_t>(std::stoull(it->second));
}

} // namespace

std::unique_ptr<Layer> makeLayer(const std::string& descriptor) {
  std::string kind;
  auto kv = parseDescriptor(descriptor, kind);
  if (kind == "conv2d") {
    auto pad = kv.count("padding") ? kv.at("padding") : "valid";
    return std::make_unique<Conv2d>(
        getSize(kv, "in"), getSize(kv, "filters"), getSize(kv, "kh"), getSize(kv, "kw"),
        pad == "same" ? Padding::Same : Padding::Valid);
  }
  if (kind == "batchnorm") {
    return std::make_unique<BatchNorm>(getSize(kv, "channels"));
  }
  if (kind == "maxpool2d") {
    return std::make_unique<MaxPool2d>(getSize(kv, "ph"), getSize(kv, "pw"));
  }
  if (kind == "activation") {
    const auto& fn = kv.at("fn");
    if (fn == "relu") {
      return std::make_unique<Activation>(ActivationType::Relu);
    }
    if (fn == "tanh") {
      return std::make_unique<Activation>(ActivationType::Tanh);
    }
    if (fn == "sigmoid") {
      return std::make_unique<Activation>(ActivationType::Sigmoid);
    }
    throw FormatError("unknown activation '" + fn + "'");
  }
  if (kind == "bilstm") {
    return std::make_unique<BiLstm>(getSize(kv, "in"), getSize(kv, "hidden"));
  }
  if (kind == "dense") {
    return std::make_unique<Dense>(getSize(kv, "in"), getSize(kv, "units"));
  }
  if (kind == "dropout") {
    return std::make_unique<Dropout>(std::stod(kv.at("rate")));
  }
  if (kind == "softmax") {
    return std::make_unique<Softmax>();
  }
  if (kind == "sequence_from_maps") {
    return std::make_unique<SequenceFromMaps>();
  }
  if (kind == "final_states") {
    return std::make_unique<FinalStates>();
  }
  throw FormatError("unknown layer kind '" + kind + "'");
}

} // namespace lungnet::nn
