#include "cmta/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "cmta/errors.hpp"

namespace cmta {

namespace {

class Writer {
 public:
  template <class T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void bytes(const std::string& s) { out_ += s; }
  void reals(const Tensor& t) {
    for (Real v : t.values()) put(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void reals(Tensor& t, std::uint8_t width) {
    for (auto& v : t.values()) {
      v = width == 4 ? static_cast<Real>(get<float>()) : static_cast<Real>(get<double>());
    }
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > in_.size()) throw LoadError(LoadErrorKind::kTruncated, origin_, "checkpoint ends early");
  }
  const std::string& in_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const std::string config_text = ckpt.config.to_text();
  Writer w;
  w.bytes(std::string(kCheckpointMagic, 4));
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint8_t>(sizeof(Real));
  w.put<std::uint64_t>(fnv1a(config_text));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(config_text.size()));
  w.bytes(config_text);
  w.put<std::uint64_t>(ckpt.epoch);
  w.put<double>(ckpt.best_metric);
  w.put<double>(ckpt.scheduler.lr);
  w.put<double>(ckpt.scheduler.best);
  w.put<std::uint8_t>(ckpt.scheduler.has_best ? 1 : 0);
  w.put<std::uint32_t>(ckpt.scheduler.bad_epochs);
  w.put<std::uint32_t>(ckpt.scheduler.reductions);
  w.put<std::uint64_t>(ckpt.optimizer.step);

  const auto params = slots<const Tensor>(ckpt.params);
  const auto names = parameter_names(ckpt.params);
  if (ckpt.optimizer.m.size() != params.size() || ckpt.optimizer.v.size() != params.size()) {
    throw ConfigError("checkpoint optimizer state does not match the parameter set");
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(names[i].size()));
    w.bytes(names[i]);
    const Tensor& p = *params[i];
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.rank()));
    for (auto e : p.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(e));
    w.reals(p);
    w.reals(ckpt.optimizer.m[i]);
    w.reals(ckpt.optimizer.v[i]);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw LoadError(LoadErrorKind::kBadMagic, origin, "not a checkpoint");
  }
  Reader r(bytes, origin);
  r.bytes(4);
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw LoadError(LoadErrorKind::kVersionMismatch, origin, "checkpoint version " + std::to_string(version));
  }
  const auto width = r.get<std::uint8_t>();
  if (width != 4 && width != 8) throw LoadError(LoadErrorKind::kMalformed, origin, "real width " + std::to_string(width));
  const auto hash = r.get<std::uint64_t>();
  const std::string config_text = r.bytes(r.get<std::uint32_t>());
  if (fnv1a(config_text) != hash) throw LoadError(LoadErrorKind::kMalformed, origin, "config hash mismatch");

  Checkpoint ckpt;
  try {
    ckpt.config = TrainConfig::from_text(config_text);
    ckpt.params = make_params(ckpt.config.model);
  } catch (const ConfigError& e) {
    throw LoadError(LoadErrorKind::kMalformed, origin, e.what());
  }
  ckpt.epoch = r.get<std::uint64_t>();
  ckpt.best_metric = r.get<double>();
  ckpt.scheduler.lr = r.get<double>();
  ckpt.scheduler.best = r.get<double>();
  ckpt.scheduler.has_best = r.get<std::uint8_t>() != 0;
  ckpt.scheduler.bad_epochs = r.get<std::uint32_t>();
  ckpt.scheduler.reductions = r.get<std::uint32_t>();

  ckpt.optimizer = AdamState::for_params(ckpt.params, ckpt.config.adam_beta1, ckpt.config.adam_beta2,
                                         ckpt.config.adam_eps);
  ckpt.optimizer.step = r.get<std::uint64_t>();
  const auto params = slots<Tensor>(ckpt.params);
  const auto names = parameter_names(ckpt.params);
  const auto count = r.get<std::uint32_t>();
  if (count != params.size()) {
    throw LoadError(LoadErrorKind::kMalformed, origin,
                    std::to_string(count) + " parameters, config implies " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = r.bytes(r.get<std::uint16_t>());
    if (name != names[i]) throw LoadError(LoadErrorKind::kMalformed, origin, "expected " + names[i] + ", found " + name);
    Shape shape(r.get<std::uint8_t>());
    for (auto& e : shape) e = r.get<std::uint32_t>();
    if (shape != params[i]->shape()) {
      throw LoadError(LoadErrorKind::kMalformed, origin, name + " has shape " + shape_string(shape));
    }
    r.reals(*params[i], width);
    r.reals(ckpt.optimizer.m[i], width);
    r.reals(ckpt.optimizer.v[i], width);
    if (!params[i]->all_finite()) throw LoadError(LoadErrorKind::kNonFinite, origin, name);
  }
  if (!r.done()) throw LoadError(LoadErrorKind::kMalformed, origin, "trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadErrorKind::kMissingFile, path.string(), "");
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str(), path.string());
}

}  // namespace cmta
