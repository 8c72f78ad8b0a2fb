#include "lungnet/model/ModelZoo.h"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "lungnet/common/Errors.h"

namespace lungnet::model {

ModelSpec ModelSpec::reference() {
  ModelSpec spec;
  spec.convBlocks = {{16, 3, 3, 2, 2}, {32, 3, 3, 2, 2}, {64, 3, 3, 2, 2}};
  return spec;
}

void ModelSpec::validate() const {
  if (nClasses != 4) {
    throw ConfigurationError("the classifier has exactly 4 classes");
  }
  if (bilstmHidden == 0 || fcUnits == 0 || nMels == 0 || frames == 0) {
    throw ConfigurationError("model sizes must be positive");
  }
  if (!(dropoutRate >= 0.0 && dropoutRate < 1.0)) {
    throw ConfigurationError("dropout rate must be in [0, 1)");
  }
  std::size_t h = nMels, w = frames;
  for (std::size_t i = 0; i < convBlocks.size(); ++i) {
    const auto& b = convBlocks[i];
    if (b.filters == 0 || b.kernelH == 0 || b.kernelW == 0 || b.poolH == 0 || b.poolW == 0) {
      throw ConfigurationError("conv block " + std::to_string(i) + " has a zero size");
    }
    if (b.kernelH > h || b.kernelW > w) {
      throw ConfigurationError("conv block " + std::to_string(i) + " kernel exceeds the " +
                               std::to_string(h) + "x" + std::to_string(w) +
                               " maps left by earlier pooling");
    }
    h = (h - b.kernelH + 1 + b.poolH - 1) / b.poolH;
    w = (w - b.kernelW + 1 + b.poolW - 1) / b.poolW;
  }
}

std::string ModelSpec::toString() const {
  std::ostringstream out;
  out << "conv=";
  for (std::size_t i = 0; i < convBlocks.size(); ++i) {
    const auto& b = convBlocks[i];
    out << (i ? "," : "") << b.filters << 'x' << b.kernelH << 'x' << b.kernelW << '/' << b.poolH
        << 'x' << b.poolW;
  }
  out << " hidden=" << bilstmHidden << " fc=" << fcUnits << " dropout="
      << std::setprecision(17) << dropoutRate << " classes=" << nClasses << " input=" << nMels
      << 'x' << frames;
  return out.str();
}

namespace {

std::size_t parseCount(const std::string& text, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size()) {
    throw ConfigurationError("bad " + what + " '" + text + "'");
  }
  return static_cast<std::size_t>(v);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, sep);) {
    parts.push_back(p);
  }
  return parts;
}

} // namespace

ModelSpec ModelSpec::parse(const std::string& text) {
  ModelSpec spec;
  std::istringstream in(text);
  for (std::string tok; in >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      throw ConfigurationError("expected key=value in model spec, got '" + tok + "'");
    }
    const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
    if (key == "conv") {
      spec.convBlocks.clear();
      for (const auto& block : value.empty() ? std::vector<std::string>{} : split(value, ',')) {
        const auto slash = block.find('/');
        const auto kernel = split(block.substr(0, slash), 'x');
        const auto pool = slash == std::string::npos ? std::vector<std::string>{}
                                                     : split(block.substr(slash + 1), 'x');
        if (kernel.size() != 3 || pool.size() != 2) {
          throw ConfigurationError("conv block must look like 16x3x3/2x2, got '" + block + "'");
        }
        spec.convBlocks.push_back({parseCount(kernel[0], "filters"),
                                   parseCount(kernel[1], "kernel"),
                                   parseCount(kernel[2], "kernel"), parseCount(pool[0], "pool"),
                                   parseCount(pool[1], "pool")});
      }
    } else if (key == "hidden") {
      spec.bilstmHidden = parseCount(value, "hidden size");
    } else if (key == "fc") {
      spec.fcUnits = parseCount(value, "fc units");
    } else if (key == "dropout") {
      try {
        spec.dropoutRate = std::stod(value);
      } catch (const std::exception&) {
        throw ConfigurationError("bad dropout rate '" + value + "'");
      }
    } else if (key == "classes") {
      spec.nClasses = parseCount(value, "class count");
    } else if (key == "input") {
      const auto dims = split(value, 'x');
      if (dims.size() != 2) {
        throw ConfigurationError("input must look like 40x128");
      }
      spec.nMels = parseCount(dims[0], "mel count");
      spec.frames = parseCount(dims[1], "frame count");
    } else {
      throw ConfigurationError("unknown model spec key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

nn::Network buildHybrid(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  nn::Network net;
  net.add(std::make_unique<nn::BatchNorm>(1), 1);
  std::size_t channels = 1, h = spec.nMels, w = spec.frames;
  for (const auto& b : spec.convBlocks) {
    net.add(std::make_unique<nn::Conv2d>(channels, b.filters, b.kernelH, b.kernelW,
                                         nn::Padding::Valid),
            1);
    net.add(std::make_unique<nn::Activation>(nn::ActivationType::Relu), 1);
    net.add(std::make_unique<nn::MaxPool2d>(b.poolH, b.poolW), 1);
    channels = b.filters;
    h = (h - b.kernelH + 1 + b.poolH - 1) / b.poolH;
    w = (w - b.kernelW + 1 + b.poolW - 1) / b.poolW;
  }
  net.add(std::make_unique<nn::SequenceFromMaps>(), 2);
  net.add(std::make_unique<nn::BiLstm>(channels * h, spec.bilstmHidden), 2);
  net.add(std::make_unique<nn::FinalStates>(), 2);
  net.add(std::make_unique<nn::Dense>(2 * spec.bilstmHidden, spec.fcUnits), 3);
  net.add(std::make_unique<nn::Activation>(nn::ActivationType::Relu), 3);
  net.add(std::make_unique<nn::Dropout>(spec.dropoutRate), 3);
  net.add(std::make_unique<nn::Dense>(spec.fcUnits, spec.nClasses), 3);
  net.add(std::make_unique<nn::Softmax>(), 3);

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < net.size(); ++i) {
    net.layer(i).initialize(rng);
  }
  net.setArchitecture(spec.toString());
  return net;
}

std::size_t countParams(const nn::Network& net, ParamFilter filter, int stage) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& layer = net.layer(i);
    if (filter == ParamFilter::Trainable && !layer.trainable()) {
      continue;
    }
    if (filter == ParamFilter::Stage && layer.stage() != stage) {
      continue;
    }
    total += layer.paramCount();
  }
  return total;
}

std::uint64_t estimateFlops(const nn::Network& net, const nn::Shape& sampleShape) {
  if (net.empty()) {
    return 0;
  }
  nn::Shape shape{1};
  shape.insert(shape.end(), sampleShape.begin(), sampleShape.end());
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    total += net.layer(i).flops(shape);
    shape = net.layer(i).outputShape(shape);
  }
  return total;
}

} // namespace lungnet::model
