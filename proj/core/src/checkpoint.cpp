// SPDX-FileCopyrightText: Copyright (c) 2026 The molproj Authors.
// SPDX-License-Identifier: Apache-2.0

#include "molproj/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "molproj/errors.hpp"
#include "molproj/random.hpp"

namespace molproj {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'L', 'P', 'R', 'O', 'J', '\0'};
constexpr std::uint8_t kDtypeF64 = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string32(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what +
                            " at byte " + std::to_string(pos_));
    }
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, ckpt.version);
  const std::size_t body_start = out.size();

  const nlohmann::ordered_json meta = {{"config", ckpt.config_text},
                                       {"stage", ckpt.stage},
                                       {"selfies_symbols", ckpt.selfies_symbols},
                                       {"text_words", ckpt.text_words}};
  const std::string meta_text = meta.dump();
  put<std::uint64_t>(out, meta_text.size());
  out += meta_text;

  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put_string32(out, t.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) put<std::uint64_t>(out, d);
    put<std::uint8_t>(out, kDtypeF64);
  }
  for (const auto& t : ckpt.tensors) {
    const auto data = t.value.data();
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  }
  put<std::uint64_t>(out, fnv1a(out.data() + body_start, out.size() - body_start));
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_bytes(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
    throw CheckpointError("not a molproj checkpoint (bad magic)");
  }
  Checkpoint ckpt;
  ckpt.version = r.get<std::uint32_t>("version");
  if (ckpt.version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(ckpt.version) +
                          " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body_start = r.pos();
  if (bytes.size() < body_start + sizeof(std::uint64_t)) {
    throw CheckpointError("checkpoint truncated before checksum");
  }

  const auto meta_len = r.get<std::uint64_t>("metadata length");
  const std::string meta_text = r.get_bytes(meta_len, "metadata");
  const auto meta = nlohmann::json::parse(meta_text, nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) {
    throw CheckpointError("checkpoint metadata is not a JSON object");
  }
  try {
    ckpt.config_text = meta.at("config").get<std::string>();
    ckpt.stage = meta.at("stage").get<int>();
    ckpt.selfies_symbols = meta.at("selfies_symbols").get<std::vector<std::string>>();
    ckpt.text_words = meta.at("text_words").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata incomplete: ") + e.what());
  }

  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<Shape> shapes;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.get_bytes(r.get<std::uint32_t>("name length"), "tensor name");
    const auto rank = r.get<std::uint32_t>("rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>("shape");
    if (r.get<std::uint8_t>("dtype") != kDtypeF64) {
      throw CheckpointError("tensor '" + t.name + "' has an unsupported dtype");
    }
    shapes.push_back(std::move(shape));
    ckpt.tensors.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    const std::size_t n = shape_size(shapes[i]);
    if (n > r.remaining() / sizeof(double)) {
      throw CheckpointError("checkpoint truncated in payload of '" + ckpt.tensors[i].name + "'");
    }
    std::vector<double> data(n);
    const std::string raw = r.get_bytes(n * sizeof(double), "payload");
    std::memcpy(data.data(), raw.data(), raw.size());
    ckpt.tensors[i].value = Tensor(shapes[i], std::move(data));
  }
  const std::size_t body_end = r.pos();
  const auto stored = r.get<std::uint64_t>("checksum");
  if (r.remaining() != 0) throw CheckpointError("trailing bytes after checkpoint checksum");
  const auto actual = fnv1a(bytes.data() + body_start, body_end - body_start);
  if (stored != actual) throw CheckpointError("checkpoint checksum mismatch (file corrupted)");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

Checkpoint snapshot(const MolecularAssistant& model, const RunConfig& config) {
  Checkpoint ckpt;
  ckpt.config_text = config.to_text();
  ckpt.stage = model.stage();
  ckpt.selfies_symbols = model.selfies_vocab().symbols();
  ckpt.text_words = model.text_vocab().words();
  for (const auto& p : model.store().all()) ckpt.tensors.push_back({p.name, p.var.value()});
  return ckpt;
}

void load_parameters(MolecularAssistant& model, const Checkpoint& ckpt) {
  auto& store = model.store();
  std::set<std::string> in_ckpt;
  for (const auto& t : ckpt.tensors) {
    if (!store.contains(t.name)) {
      throw CheckpointError("checkpoint tensor '" + t.name + "' does not exist in the model");
    }
    auto& param = store.get(t.name);
    if (param.var.shape() != t.value.shape()) {
      throw CheckpointError("shape mismatch for tensor '" + t.name + "': checkpoint has " +
                            shape_string(t.value.shape()) + ", model expects " +
                            shape_string(param.var.shape()));
    }
    in_ckpt.insert(t.name);
  }
  for (const auto& p : store.all()) {
    if (!in_ckpt.count(p.name)) {
      throw CheckpointError("model parameter '" + p.name + "' is missing from the checkpoint");
    }
  }
  for (const auto& t : ckpt.tensors) store.get(t.name).var.mutable_value() = t.value;
  model.set_stage(ckpt.stage);
}

MolecularAssistant restore_model(const Checkpoint& ckpt, const RunConfig& config) {
  auto model = MolecularAssistant::create(config.model_config(),
                                          SelfiesVocab::from_symbols(ckpt.selfies_symbols),
                                          TextVocab::from_words(ckpt.text_words), config.seed);
  if (model.selfies_vocab().symbols() != ckpt.selfies_symbols) {
    throw CheckpointError("checkpoint SELFIES vocabulary is malformed");
  }
  for (const auto& t : ckpt.tensors) {
    if (t.name.rfind("lora.", 0) == 0) {
      model.enable_lora(config.seed);
      break;
    }
  }
  load_parameters(model, ckpt);
  return model;
}

}  // namespace molproj
