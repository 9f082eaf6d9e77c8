#include "mga/model.hpp"

#include <cstring>
#include <fstream>
#include <set>

namespace mga {

ModelConfig ModelConfig::full() {
  ModelConfig cfg;
  cfg.preset = "full";
  cfg.n_classes = 10;
  cfg.n_mga = 4;
  cfg.encoder = EncoderConfig::full();
  cfg.mga = MgaConfig{};  // d=144, 4 heads, c=3, gru 512
  cfg.mga.max_seq_len = 125;
  return cfg;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig cfg;
  cfg.preset = "tiny";
  cfg.n_classes = 10;
  cfg.n_mga = 2;
  cfg.encoder.channels = {4, 16};
  cfg.encoder.pooling = {{2, 8}, {2, 8}};
  cfg.encoder.variant = ConvBlockVariant::RH_CONV;
  cfg.encoder.dropout = 0.1;
  cfg.mga.d = 16;
  cfg.mga.heads = 2;
  cfg.mga.context = 3;
  cfg.mga.gru_hidden = 16;
  cfg.mga.max_seq_len = 125;
  return cfg;
}

void ModelConfig::validate() const {
  encoder.validate();
  mga.validate();
  if (n_classes < 1) throw ConfigError("n_classes must be >= 1");
  if (n_mga < 1) throw ConfigError("n_mga must be >= 1");
  if (encoder.channels.back() != mga.d)
    throw ConfigError("encoder output channels " +
                      std::to_string(encoder.channels.back()) +
                      " must equal attention width " + std::to_string(mga.d));
}

MgaNet::MgaNet(const ModelConfig& cfg_, uint64_t seed) : cfg(cfg_) {
  cfg.validate();
  Rng rng(seed);
  encoder = Encoder("encoder", cfg.encoder, rng, registry_);
  class_token.value = Tensor(Shape{1, cfg.mga.d});
  class_token.name = "class_token";
  init_normal(class_token.value, 0.02, rng);
  class_token.value.set_tracked();
  registry_.add(class_token);
  for (int i = 0; i < cfg.n_mga; ++i)
    mga_stack.emplace_back("mga." + std::to_string(i), cfg.mga, rng, registry_);
  strong_head = Linear("strong_head", cfg.mga.d, cfg.n_classes, rng, registry_);
  weak_head = Linear("weak_head", cfg.mga.d, cfg.n_classes, rng, registry_);
}

int MgaNet::out_frames(int in_frames) const {
  int t = in_frames;
  for (const auto& [pt, pf] : cfg.encoder.pooling) t /= pt;
  return t;
}

ModelOutput MgaNet::forward(const Tensor& features, const FwdCtx& ctx) {
  if (features.rank() != 2)
    throw DimensionError("model wants [frames, mels] features, got " +
                         shape_str(features.shape()));
  Tensor x = reshape(features, {1, features.extent(0), features.extent(1)});
  Tensor enc = encoder.forward(x, ctx);  // [C, T', F']
  const int c = enc.extent(0), tp = enc.extent(1), fp = enc.extent(2);
  if (fp != 1 || c != cfg.mga.d)
    throw DimensionError("encoder output " + shape_str(enc.shape()) +
                         " does not flatten to the attention width " +
                         std::to_string(cfg.mga.d));
  Tensor seq = transpose(reshape(enc, {c, tp}));  // [T', d]
  Tensor h = concat_rows({class_token.value, seq});
  for (const MgaModule& m : mga_stack) h = m.forward(h, /*token_rows=*/1);

  ModelOutput out;
  out.strong = sigmoid(strong_head.forward(slice_rows(h, 1, tp + 1)));
  out.weak = reshape(sigmoid(weak_head.forward(slice_rows(h, 0, 1))),
                     {cfg.n_classes});
  return out;
}

namespace {

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::istream& in, const std::string& path) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw IoError(path + ": truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamRegistry& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write("MGAC", 4);
  write_u32(out, 1);  // version
  for (const Parameter& p : params.all()) {
    write_u32(out, static_cast<uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u32(out, static_cast<uint32_t>(p.value.rank()));
    for (int e : p.value.shape()) write_u32(out, static_cast<uint32_t>(e));
    out.write(reinterpret_cast<const char*>(p.value.values().data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw IoError("short write: " + path);
}

void load_checkpoint(const std::string& path, const ParamRegistry& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MGAC", 4) != 0)
    throw IoError(path + ": bad checkpoint magic");
  const uint32_t version = read_u32(in, path);
  if (version != 1)
    throw IoError(path + ": unsupported checkpoint version " +
                  std::to_string(version));

  std::set<std::string> filled;
  while (in.peek() != std::char_traits<char>::eof()) {
    const uint32_t name_len = read_u32(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError(path + ": truncated checkpoint");
    const uint32_t rank = read_u32(in, path);
    Shape shape(rank);
    for (uint32_t i = 0; i < rank; ++i)
      shape[i] = static_cast<int>(read_u32(in, path));

    const Parameter* p = params.find(name);
    if (!p)
      throw IoError(path + ": checkpoint parameter '" + name +
                    "' not present in this model configuration");
    if (p->value.shape() != shape)
      throw IoError(path + ": shape mismatch for '" + name + "': checkpoint " +
                    shape_str(shape) + " vs model " +
                    shape_str(p->value.shape()));
    Tensor target = p->value;
    in.read(reinterpret_cast<char*>(target.values().data()),
            static_cast<std::streamsize>(target.size() * sizeof(double)));
    if (!in) throw IoError(path + ": truncated parameter payload for " + name);
    filled.insert(name);
  }
  for (const Parameter& p : params.all())
    if (!filled.count(p.name))
      throw IoError(path + ": checkpoint is missing parameter '" + p.name + "'");
}

}  // namespace mga
