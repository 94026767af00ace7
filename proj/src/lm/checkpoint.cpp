#include "adec/lm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "adec/errors.hpp"

namespace adec::lm {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), s.size());
}

class Reader {
 public:
  Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}

  void bytes(char* dst, std::size_t n) {
    is_.read(dst, n);
    if (static_cast<std::size_t>(is_.gcount()) != n) throw FormatError(path_ + ": truncated checkpoint");
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (std::uint64_t(u32()) << 32);
  }
  std::string str(std::size_t limit = 1 << 24) {
    const std::uint32_t n = u32();
    if (n > limit) throw FormatError(path_ + ": implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& is_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write checkpoint " + path);
    os.write(kCheckpointMagic, 4);
    os.put(static_cast<char>(kCheckpointVersion));
    put_str(os, to_json(ck.config).dump());
    const nlohmann::json meta{{"step", ck.meta.step},
                              {"seed", ck.meta.seed},
                              {"config_hash", ck.meta.config_hash},
                              {"kind", ck.meta.kind}};
    put_str(os, meta.dump());
    put_u32(os, static_cast<std::uint32_t>(ck.params.all().size()));
    for (const auto& [name, p] : ck.params.all()) {
      put_str(os, name);
      put_u32(os, static_cast<std::uint32_t>(p.shape.size()));
      for (auto d : p.shape) put_u64(os, d);
      for (float f : p.data) put_u32(os, std::bit_cast<std::uint32_t>(f));
    }
    if (!os) throw Error("write failed for checkpoint " + path);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path);
  Reader r(is, path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError(path + ": not a checkpoint file");
  char version;
  r.bytes(&version, 1);
  if (static_cast<std::uint8_t>(version) != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(int(version)));
  }
  Checkpoint ck;
  try {
    ck.config = model_config_from_json(nlohmann::json::parse(r.str()));
    const auto meta = nlohmann::json::parse(r.str());
    ck.meta.step = meta.at("step").get<std::int64_t>();
    ck.meta.seed = meta.at("seed").get<std::uint64_t>();
    ck.meta.config_hash = meta.at("config_hash").get<std::string>();
    ck.meta.kind = meta.at("kind").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad header: " + e.what());
  } catch (const UsageError& e) {
    throw FormatError(path + ": bad config: " + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(4096);
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 4) throw FormatError(path + ": bad rank for " + name);
    ad::Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.u64();
      if (d == 0 || d > (1u << 28)) throw FormatError(path + ": bad dimension for " + name);
      n *= d;
    }
    if (n > (1u << 28)) throw FormatError(path + ": tensor too large: " + name);
    std::vector<float> data(n);
    for (auto& f : data) f = std::bit_cast<float>(r.u32());
    ck.params.add(name, std::move(shape), std::move(data));
  }
  return ck;
}

}  // namespace adec::lm

#include "adec/lm/head.hpp"
#include "adec/lm/transformer.hpp"

namespace adec::lm {

namespace {
bool is_head_param(const std::string& name) { return name.rfind("head.", 0) == 0; }
}  // namespace

Checkpoint make_checkpoint(const BaseModel* base, const AdaptiveHead* head, CheckpointMeta meta) {
  if (!base && !head) throw ContractError("checkpoint needs a base or a head");
  Checkpoint ck;
  if (base) ck.config = base->config;
  if (head) {
    if (!base) {
      ck.config.d_model = head->d_model;
    }
    ck.config.head_hidden = head->hidden;
    ck.config.temperature_grid = head->grid;
  }
  meta.kind = base && head ? "base+head" : base ? "base" : "head";
  if (meta.config_hash.empty()) meta.config_hash = ck.config.hash();
  ck.meta = std::move(meta);
  auto copy = [&](const ad::ParamSet& ps) {
    for (const auto& [name, p] : ps.all()) ck.params.add(name, p.shape, p.data);
  };
  if (base) copy(base->params);
  if (head) copy(head->params);
  return ck;
}

bool has_base(const Checkpoint& ck) { return ck.params.contains("tok_emb"); }
bool has_head(const Checkpoint& ck) { return ck.params.contains("head.w1"); }

BaseModel base_from(const Checkpoint& ck) {
  if (!has_base(ck)) throw FormatError("checkpoint holds no base model");
  BaseModel m;
  m.config = ck.config;
  for (const auto& [name, p] : ck.params.all()) {
    if (!is_head_param(name)) m.params.add(name, p.shape, p.data);
  }
  auto expected = BaseModel::init(ck.config, 0);
  for (const auto& [name, p] : expected.params.all()) {
    if (!m.params.contains(name) || m.params.get(name).shape != p.shape) {
      throw FormatError("checkpoint base parameter missing or misshapen: " + name);
    }
  }
  m.frozen = true;
  return m;
}

AdaptiveHead head_from(const Checkpoint& ck) {
  if (!has_head(ck)) throw FormatError("checkpoint holds no temperature head");
  AdaptiveHead h;
  h.d_model = ck.config.d_model;
  h.hidden = ck.config.head_hidden;
  h.grid = ck.config.temperature_grid;
  for (const auto& [name, p] : ck.params.all()) {
    if (is_head_param(name)) h.params.add(name, p.shape, p.data);
  }
  const auto& w1 = h.params.get("head.w1");
  const auto& w3 = h.params.get("head.w3");
  if (w1.shape != ad::Shape{std::size_t(h.d_model), std::size_t(h.hidden)} ||
      w3.shape != ad::Shape{std::size_t(h.hidden), h.grid.size()}) {
    throw FormatError("checkpoint head shapes disagree with its config");
  }
  return h;
}

}  // namespace adec::lm
