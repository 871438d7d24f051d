#include "fnet/model_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "fnet/config_json.hpp"

namespace fs = std::filesystem;

namespace fnet {

namespace {

constexpr char kMagic[] = {'F', 'N', 'E', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw IoError("params: truncated u32");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | in[pos + static_cast<std::size_t>(i)];
  pos += 4;
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_params(const ParamStore<float>& params) {
  std::vector<std::uint8_t> out(kMagic, kMagic + sizeof(kMagic));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.names()[i];
    const auto& t = params.var(i).value();
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) {
      put_u32(out, static_cast<std::uint32_t>(t.dim(d)));
    }
    const auto* f = t.data();
    for (std::int64_t k = 0; k < t.numel(); ++k) {
      std::uint32_t bits;
      static_assert(sizeof(bits) == sizeof(float));
      std::memcpy(&bits, &f[k], sizeof(bits));
      put_u32(out, bits);
    }
  }
  return out;
}

void deserialize_params(const std::vector<std::uint8_t>& bytes,
                        ParamStore<float>& params) {
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("params: missing FNET1 magic");
  }
  std::size_t pos = sizeof(kMagic);
  while (pos < bytes.size()) {
    const auto name_len = get_u32(bytes, pos);
    if (pos + name_len > bytes.size()) throw IoError("params: truncated name");
    std::string name(reinterpret_cast<const char*>(bytes.data() + pos),
                     name_len);
    pos += name_len;
    const auto rank = get_u32(bytes, pos);
    std::vector<int> shape;
    shape.reserve(rank);
    std::int64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = get_u32(bytes, pos);
      shape.push_back(static_cast<int>(dim));
      numel *= dim;
    }
    Tensor32 t(shape);
    for (std::int64_t k = 0; k < numel; ++k) {
      const auto bits = get_u32(bytes, pos);
      float f;
      std::memcpy(&f, &bits, sizeof(f));
      t[k] = f;
    }
    params.create(name, std::move(t));
  }
}

void save_params(const ParamStore<float>& params, const std::string& path) {
  const auto bytes = serialize_params(params);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path);
}

void load_params(const std::string& path, ParamStore<float>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  deserialize_params(bytes, params);
}

void save_model(const FibrosisModel& model, const std::string& dir) {
  fs::create_directories(dir);
  save_params(model.params, (fs::path(dir) / "params.bin").string());
  write_text_file((fs::path(dir) / "backbone.json").string(),
                  to_json(model.backbone_cfg));
  write_text_file((fs::path(dir) / "preprocess.json").string(),
                  to_json(model.preprocess_cfg));
  write_text_file((fs::path(dir) / "stats.json").string(),
                  to_json(model.stats));
  write_text_file((fs::path(dir) / "ensemble.json").string(),
                  to_json(model.ensemble));
  write_text_file((fs::path(dir) / "enet.json").string(), to_json(model.enet));
  write_text_file((fs::path(dir) / "quantile.json").string(),
                  to_json(model.quantile));
}

FibrosisModel load_model(const std::string& dir) {
  FibrosisModel model;
  model.backbone_cfg = backbone_config_from_json(
      read_text_file((fs::path(dir) / "backbone.json").string()));
  model.preprocess_cfg = preprocess_config_from_json(
      read_text_file((fs::path(dir) / "preprocess.json").string()));
  model.stats = encoding_stats_from_json(
      read_text_file((fs::path(dir) / "stats.json").string()));
  model.ensemble = ensemble_config_from_json(
      read_text_file((fs::path(dir) / "ensemble.json").string()));
  model.enet = elastic_net_from_json(
      read_text_file((fs::path(dir) / "enet.json").string()));
  model.quantile = quantile_from_json(
      read_text_file((fs::path(dir) / "quantile.json").string()));
  load_params((fs::path(dir) / "params.bin").string(), model.params);
  if (!model.params.contains(kHeadWeightName) ||
      !model.params.contains(kHeadBiasName)) {
    throw IoError("model bundle: slope head parameters missing");
  }
  return model;
}

}  // namespace fnet
