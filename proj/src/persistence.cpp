#include "s2st/persistence.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "s2st/error.hpp"

namespace s2st {
namespace {

constexpr char kMagic[4] = {'S', '2', 'S', 'T'};

template <class T>
void put_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

template <class T>
T get_le(const char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<T>(u);
}

const char* dtype_name(DType d) { return d == DType::f64 ? "f64" : "f32"; }
std::size_t dtype_size(DType d) { return d == DType::f64 ? 8 : 4; }

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json arrays = nlohmann::json::array();
  std::string payload;
  for (const auto& a : ckpt.arrays) {
    const std::size_t offset = payload.size();
    for (Eigen::Index r = 0; r < a.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < a.value.cols(); ++c) {
        if (a.dtype == DType::f64) {
          put_le(payload, a.value(r, c));
        } else {
          put_le(payload, static_cast<float>(a.value(r, c)));
        }
      }
    }
    arrays.push_back({{"name", a.name},
                      {"shape", {a.value.rows(), a.value.cols()}},
                      {"dtype", dtype_name(a.dtype)},
                      {"offset", offset},
                      {"nbytes", payload.size() - offset}});
  }
  nlohmann::json manifest{{"arrays", arrays},
                          {"config", ckpt.config},
                          {"vocab", ckpt.vocab},
                          {"rng_state", ckpt.rng_state},
                          {"extras", ckpt.extras}};
  const std::string m = manifest.dump();
  std::string header(kMagic, 4);
  put_le(header, kCheckpointVersion);
  put_le(header, static_cast<std::uint64_t>(m.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(m.data(), static_cast<std::streamsize>(m.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw FormatError(path.string() + " is not a checkpoint (bad magic)");
  }
  if (data.size() < 16) throw CorruptCheckpoint("truncated header in " + path.string());
  const auto version = get_le<std::uint32_t>(data.data() + 4);
  if (version > kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " is newer than supported " +
                       std::to_string(kCheckpointVersion));
  }
  const auto mlen = get_le<std::uint64_t>(data.data() + 8);
  if (mlen > data.size() - 16) throw CorruptCheckpoint("manifest extends past end of file");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(data.substr(16, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("unreadable manifest: ") + e.what());
  }
  const std::size_t base = 16 + mlen;
  const std::size_t payload_size = data.size() - base;
  Checkpoint ck;
  try {
    ck.config = manifest.at("config");
    ck.vocab = manifest.at("vocab").get<std::vector<std::string>>();
    ck.rng_state = manifest.at("rng_state").get<std::string>();
    ck.extras = manifest.at("extras");
    std::size_t expected_offset = 0;
    for (const auto& a : manifest.at("arrays")) {
      NamedArray na;
      na.name = a.at("name").get<std::string>();
      const std::string dt = a.at("dtype").get<std::string>();
      if (dt == "f64") {
        na.dtype = DType::f64;
      } else if (dt == "f32") {
        na.dtype = DType::f32;
      } else {
        throw CorruptCheckpoint("unknown dtype " + dt);
      }
      const auto shape = a.at("shape").get<std::vector<std::int64_t>>();
      const auto offset = a.at("offset").get<std::size_t>();
      const auto nbytes = a.at("nbytes").get<std::size_t>();
      if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0) throw CorruptCheckpoint("bad shape for " + na.name);
      const std::size_t count = static_cast<std::size_t>(shape[0]) * static_cast<std::size_t>(shape[1]);
      if (nbytes != count * dtype_size(na.dtype)) throw CorruptCheckpoint("size mismatch for " + na.name);
      if (offset != expected_offset) throw CorruptCheckpoint("overlapping or gapped array " + na.name);
      if (offset + nbytes > payload_size) throw CorruptCheckpoint("array " + na.name + " extends past end of file");
      expected_offset = offset + nbytes;
      na.value.resize(shape[0], shape[1]);
      const char* p = data.data() + base + offset;
      for (Eigen::Index r = 0; r < na.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < na.value.cols(); ++c) {
          if (na.dtype == DType::f64) {
            na.value(r, c) = get_le<double>(p);
            p += 8;
          } else {
            na.value(r, c) = get_le<float>(p);
            p += 4;
          }
        }
      }
      ck.arrays.push_back(std::move(na));
    }
    if (expected_offset != payload_size) throw CorruptCheckpoint("trailing bytes after payload");
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("malformed manifest: ") + e.what());
  }
  return ck;
}

void read_array(const Checkpoint& ckpt, const std::string& name, Matrix& out) {
  const NamedArray* a = ckpt.find(name);
  if (!a) throw CorruptCheckpoint("checkpoint has no array " + name);
  if (a->value.rows() != out.rows() || a->value.cols() != out.cols()) {
    throw CorruptCheckpoint("shape mismatch for " + name);
  }
  out = a->value;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

Rng rng_from_string(const std::string& s) {
  Rng rng;
  if (s.empty()) return rng;
  std::istringstream ss(s);
  ss >> rng;
  if (!ss) throw CorruptCheckpoint("unreadable random state");
  return rng;
}

nlohmann::json dims_to_json(const HsmmDims& d) {
  return {{"K", d.K}, {"D", d.D}, {"V", d.V}, {"d1", d.d1}, {"d2", d.d2}, {"d3", d.d3}};
}

HsmmDims hsmm_dims_from_json(const nlohmann::json& j) {
  return {j.at("K").get<int>(), j.at("D").get<int>(), j.at("V").get<int>(),
          j.at("d1").get<int>(), j.at("d2").get<int>(), j.at("d3").get<int>()};
}

nlohmann::json dims_to_json(const DiscDims& d) {
  return {{"V", d.V}, {"d3", d.d3}, {"windows", d.windows}, {"filters", d.filters}, {"hidden", d.hidden}};
}

DiscDims disc_dims_from_json(const nlohmann::json& j) {
  return {j.at("V").get<int>(), j.at("d3").get<int>(), j.at("windows").get<std::vector<int>>(),
          j.at("filters").get<int>(), j.at("hidden").get<int>()};
}

nlohmann::json pool_to_json(const TemplatePool& pool) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < pool.chains().size(); ++i) {
    out.push_back({{"chain", pool.chains()[i]}, {"count", pool.counts()[i]}});
  }
  return out;
}

TemplatePool pool_from_json(const nlohmann::json& j) {
  TemplatePool pool;
  for (const auto& e : j) pool.add(e.at("chain").get<StateChain>(), e.at("count").get<long>());
  return pool;
}

Checkpoint to_checkpoint(const ModelBundle& b) {
  Checkpoint ck;
  ck.config = b.config.to_json();
  ck.vocab = b.vocab.non_reserved();
  ck.rng_state = b.rng_state;
  ck.extras = b.extras;
  if (b.hsmm) {
    ck.extras["hsmm_dims"] = dims_to_json(b.hsmm->dims);
    add_arrays(ck, "hsmm.", const_cast<HsmmParams&>(*b.hsmm));
  }
  if (b.generator) {
    ck.extras["generator_dims"] = dims_to_json(b.generator->dims);
    add_arrays(ck, "generator.", const_cast<GeneratorParams&>(*b.generator));
  }
  if (b.discriminator) {
    ck.extras["discriminator_dims"] = dims_to_json(b.discriminator->dims);
    add_arrays(ck, "discriminator.", const_cast<DiscriminatorParams&>(*b.discriminator));
  }
  if (b.pool) ck.extras["pool"] = pool_to_json(*b.pool);
  return ck;
}

ModelBundle from_checkpoint(const Checkpoint& ck) {
  ModelBundle b;
  try {
    b.config = TrainConfig::from_json(ck.config);
  } catch (const InvalidConfig& e) {
    throw CorruptCheckpoint(std::string("stored config rejected: ") + e.what());
  }
  b.vocab = Vocab::from_tokens(ck.vocab);
  b.rng_state = ck.rng_state;
  b.extras = ck.extras;
  try {
    if (ck.extras.contains("hsmm_dims")) {
      b.hsmm = HsmmParams::zeros(hsmm_dims_from_json(ck.extras.at("hsmm_dims")));
      read_arrays(ck, "hsmm.", *b.hsmm);
      b.extras.erase("hsmm_dims");
    }
    if (ck.extras.contains("generator_dims")) {
      b.generator = GeneratorParams::zeros(hsmm_dims_from_json(ck.extras.at("generator_dims")));
      read_arrays(ck, "generator.", *b.generator);
      b.extras.erase("generator_dims");
    }
    if (ck.extras.contains("discriminator_dims")) {
      b.discriminator = DiscriminatorParams::zeros(disc_dims_from_json(ck.extras.at("discriminator_dims")));
      read_arrays(ck, "discriminator.", *b.discriminator);
      b.extras.erase("discriminator_dims");
    }
    if (ck.extras.contains("pool")) {
      b.pool = pool_from_json(ck.extras.at("pool"));
      b.extras.erase("pool");
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("malformed extras: ") + e.what());
  } catch (const InvalidConfig& e) {
    throw CorruptCheckpoint(std::string("stored model rejected: ") + e.what());
  }
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  save_checkpoint(to_checkpoint(bundle), path);
}

ModelBundle load_bundle(const std::filesystem::path& path) { return from_checkpoint(load_checkpoint(path)); }

}  // namespace s2st
