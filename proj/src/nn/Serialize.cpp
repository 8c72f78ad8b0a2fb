#include "lungnet/nn/Serialize.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lungnet/common/Errors.h"

namespace lungnet::nn {

static_assert(std::endian::native == std::endian::little,
              "the container writes native doubles and assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'R', 'M', 'D', 'L'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    out_.append(static_cast<const char*>(p), n);
  }
  void u8(std::uint8_t v) {
    bytes(&v, 1);
  }
  void u32(std::uint32_t v) {
    bytes(&v, 4);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void parameters(const std::vector<Parameter>& ps) {
    u32(static_cast<std::uint32_t>(ps.size()));
    for (const auto& p : ps) {
      str(p.name);
      u32(static_cast<std::uint32_t>(p.value.rank()));
      for (auto d : p.value.shape()) {
        u32(static_cast<std::uint32_t>(d));
      }
      bytes(p.value.data().data(), p.value.size() * sizeof(double));
    }
  }
  std::string take() {
    return std::move(out_);
  }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  void bytes(void* p, std::size_t n) {
    if (in_.size() - pos_ < n) {
      throw FormatError("model container is truncated at byte " + std::to_string(pos_));
    }
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::string str() {
    const auto n = u32();
    if (in_.size() - pos_ < n) {
      throw FormatError("model container is truncated at byte " + std::to_string(pos_));
    }
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void parameters(std::vector<Parameter>& ps, const std::string& where) {
    const auto n = u32();
    if (n != ps.size()) {
      throw FormatError(where + ": expected " + std::to_string(ps.size()) + " tensors, found " +
                        std::to_string(n));
    }
    for (auto& p : ps) {
      const auto name = str();
      if (name != p.name) {
        throw FormatError(where + ": expected tensor '" + p.name + "', found '" + name + "'");
      }
      Shape shape(u32());
      for (auto& d : shape) {
        d = u32();
      }
      if (shape != p.value.shape()) {
        throw FormatError(where + "." + name + ": shape " + shapeToString(shape) +
                          " does not match " + shapeToString(p.value.shape()));
      }
      bytes(p.value.data().data(), p.value.size() * sizeof(double));
    }
  }
  bool done() const {
    return pos_ == in_.size();
  }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

void writeLayer(Writer& w, const Layer& layer) {
  w.str(layer.descriptor());
  w.u8(static_cast<std::uint8_t>(layer.stage()));
  w.parameters(layer.params());
  w.parameters(layer.buffers());
}

class Fnv1a {
 public:
  void add(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h_ = (h_ ^ b[i]) * 0x100000001b3ULL;
    }
  }
  void add(const std::string& s) {
    const auto n = static_cast<std::uint64_t>(s.size());
    add(&n, sizeof n);
    add(s.data(), s.size());
  }
  std::uint64_t value() const {
    return h_;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

} // namespace

std::string serializeNetwork(const Network& net) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u8(kModelFormatVersion);
  w.str(net.architecture());
  w.u32(static_cast<std::uint32_t>(net.size()));
  for (std::size_t i = 0; i < net.size(); ++i) {
    writeLayer(w, net.layer(i));
  }
  return w.take();
}

Network deserializeNetwork(const std::string& bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("not a model container (bad magic)");
  }
  if (const auto v = r.u8(); v != kModelFormatVersion) {
    throw FormatError("unsupported model container version " + std::to_string(v));
  }
  Network net;
  net.setArchitecture(r.str());
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto descriptor = r.str();
    std::unique_ptr<Layer> layer;
    try {
      layer = makeLayer(descriptor);
    } catch (const std::exception&) {
      throw FormatError("layer " + std::to_string(i) + ": bad descriptor '" + descriptor + "'");
    }
    const int stage = r.u8();
    const auto where = "layer " + std::to_string(i);
    r.parameters(layer->params(), where);
    r.parameters(layer->buffers(), where);
    try {
      net.add(std::move(layer), stage);
    } catch (const ArgumentError& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  if (!r.done()) {
    throw FormatError("trailing bytes after the last layer");
  }
  return net;
}

std::string serializeStage(const Network& net, int stage) {
  Writer w;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (net.layer(i).stage() == stage) {
      writeLayer(w, net.layer(i));
    }
  }
  return w.take();
}

std::uint64_t architectureFingerprint(const Network& net) {
  Fnv1a h;
  h.add(net.architecture());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& layer = net.layer(i);
    h.add(layer.descriptor());
    for (const auto* group : {&layer.params(), &layer.buffers()}) {
      for (const auto& p : *group) {
        h.add(p.name);
        h.add(shapeToString(p.value.shape()));
      }
    }
  }
  return h.value();
}

void writeFileAtomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw InputError("cannot open " + tmp.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw InputError("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void saveNetwork(const Network& net, const std::filesystem::path& path) {
  writeFileAtomic(path, serializeNetwork(net));
}

Network loadNetwork(const std::filesystem::path& path) {
  return deserializeNetwork(readFile(path));
}

} // namespace lungnet::nn
