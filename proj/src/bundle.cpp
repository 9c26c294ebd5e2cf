#include "glora/bundle.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace glora {

namespace {

// entry names are "<attach point>.<role>"; roles A/B or glu_*.{wv,bv,wg,bg}
std::string point_of_entry(const std::string& name) {
  size_t dot = name.rfind('.');
  if (dot == std::string::npos) return "";
  std::string tail = name.substr(dot + 1);
  if (tail == "A" || tail == "B") return name.substr(0, dot);
  size_t dot2 = name.rfind('.', dot - 1);
  if (dot2 == std::string::npos) return "";
  std::string role = name.substr(dot2 + 1, dot - dot2 - 1);
  if (role.rfind("glu_", 0) == 0) return name.substr(0, dot2);
  return "";
}

}  // namespace

std::vector<std::string> AdapterBundle::attach_points() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& [name, t] : entries) {
    std::string pt = point_of_entry(name);
    if (pt.empty())
      throw std::invalid_argument("bundle entry '" + name + "' is not a recognized adapter slot");
    if (seen.insert(pt).second) out.push_back(pt);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<uint8_t> serialize_bundle(const AdapterBundle& b) {
  Container c;
  c.kind = static_cast<uint8_t>(b.kind);
  c.rank = static_cast<uint16_t>(b.rank);
  c.fingerprint = b.fingerprint;
  for (const auto& [name, t] : b.entries) {
    ContainerEntry e;
    e.name = name;
    e.dtype = EntryDtype::F32;
    for (int d : t.shape()) e.dims.push_back(static_cast<uint32_t>(d));
    e.floats = t.values();
    c.entries.push_back(std::move(e));
  }
  return write_container(c);
}

AdapterBundle deserialize_bundle(const uint8_t* data, size_t n) {
  Container c = read_container(data, n);
  if (c.kind > 3)
    throw ContainerError(ContainerErrc::kind_mismatch,
                         "container kind " + std::to_string(c.kind) + " is not an adapter bundle");
  AdapterBundle b;
  b.kind = static_cast<AdapterKind>(c.kind);
  b.rank = c.rank;
  b.fingerprint = c.fingerprint;
  for (const auto& e : c.entries) {
    if (e.dtype == EntryDtype::I32)
      throw ContainerError(ContainerErrc::bad_entry, "bundle entry " + e.name + " has integer dtype");
    Shape shape;
    for (uint32_t d : e.dims) shape.push_back(static_cast<int>(d));
    b.entries[e.name] = Tensor::from_values(shape, e.floats);
  }
  return b;
}

AdapterBundle deserialize_bundle(const std::vector<uint8_t>& data) {
  return deserialize_bundle(data.data(), data.size());
}

AdapterBundle bundle_from_adapter(const Adapter& adapter, uint64_t fingerprint) {
  AdapterBundle b;
  b.kind = adapter.spec().kind;
  b.rank = adapter.spec().rank;
  b.fingerprint = fingerprint;
  for (const auto& [name, t] : adapter.params()) {
    std::vector<double> rounded(t.values().size());
    for (size_t i = 0; i < rounded.size(); ++i)
      rounded[i] = static_cast<double>(static_cast<float>(t.values()[i]));
    b.entries[name] = Tensor::from_values(t.shape(), std::move(rounded));
  }
  return b;
}

void save_bundle(const AdapterBundle& b, const std::string& path) {
  write_file_atomic(path, serialize_bundle(b));
}

AdapterBundle load_bundle(const std::string& path) {
  return deserialize_bundle(read_file(path));
}

// ---------------------------------------------------------------------------
// checkpoints

std::vector<uint8_t> serialize_checkpoint(const SeqModel& model) {
  const ModelConfig& cfg = model.config();
  Container c;
  c.kind = kKindBaseModel;
  c.rank = 0;
  c.fingerprint = cfg.fingerprint();
  {
    ContainerEntry e;
    e.name = "config";
    e.dtype = EntryDtype::I32;
    e.ints = {cfg.d_model,
              cfg.n_layers,
              cfg.n_heads,
              cfg.feature_dim,
              cfg.ffn_dim,
              cfg.vocab_size,
              cfg.max_frames,
              cfg.regime == Regime::EncDecCE ? 0 : 1,
              static_cast<int32_t>(cfg.seed & 0xFFFFFFFFu),
              static_cast<int32_t>(cfg.seed >> 32)};
    e.dims = {static_cast<uint32_t>(e.ints.size())};
    c.entries.push_back(std::move(e));
  }
  for (const auto& [name, t] : model.params()) {
    ContainerEntry e;
    e.name = name;
    e.dtype = EntryDtype::F64;
    for (int d : t.shape()) e.dims.push_back(static_cast<uint32_t>(d));
    e.floats = t.values();
    c.entries.push_back(std::move(e));
  }
  return write_container(c);
}

SeqModel deserialize_checkpoint(const uint8_t* data, size_t n) {
  Container c = read_container(data, n);
  if (c.kind != kKindBaseModel)
    throw ContainerError(ContainerErrc::kind_mismatch,
                         "container kind " + std::to_string(c.kind) + " is not a model checkpoint");
  const ContainerEntry* ce = c.find("config");
  if (!ce || ce->dtype != EntryDtype::I32 || ce->ints.size() != 10)
    throw ContainerError(ContainerErrc::bad_entry, "checkpoint missing config entry");
  ModelConfig cfg;
  cfg.d_model = ce->ints[0];
  cfg.n_layers = ce->ints[1];
  cfg.n_heads = ce->ints[2];
  cfg.feature_dim = ce->ints[3];
  cfg.ffn_dim = ce->ints[4];
  cfg.vocab_size = ce->ints[5];
  cfg.max_frames = ce->ints[6];
  cfg.regime = ce->ints[7] == 0 ? Regime::EncDecCE : Regime::EncCTC;
  cfg.seed = (static_cast<uint64_t>(static_cast<uint32_t>(ce->ints[9])) << 32) |
             static_cast<uint32_t>(ce->ints[8]);
  if (c.fingerprint != cfg.fingerprint())
    throw ContainerError(ContainerErrc::bad_entry, "checkpoint fingerprint does not match config");

  SeqModel model = SeqModel::init(cfg);
  size_t loaded = 0;
  for (const auto& e : c.entries) {
    if (e.name == "config") continue;
    if (e.dtype != EntryDtype::F64)
      throw ContainerError(ContainerErrc::bad_entry, "checkpoint entry " + e.name + " must be f64");
    Shape shape;
    for (uint32_t d : e.dims) shape.push_back(static_cast<int>(d));
    model.set_param(e.name, Tensor::from_values(shape, e.floats));
    ++loaded;
  }
  if (loaded != model.params().size())
    throw ContainerError(ContainerErrc::bad_entry, "checkpoint parameter set incomplete");
  model.freeze_all();
  return model;
}

void save_checkpoint(const SeqModel& model, const std::string& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

SeqModel load_checkpoint(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  return deserialize_checkpoint(bytes.data(), bytes.size());
}

}  // namespace glora
