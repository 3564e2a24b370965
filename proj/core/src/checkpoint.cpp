#include "eqa/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#ifndef EQA_VERSION
#define EQA_VERSION "unknown"
#endif

namespace eqa {

std::string code_version() { return EQA_VERSION; }

namespace {

constexpr char kParamMagic[8] = {'E', 'Q', 'A', 'P', 'A', 'R', 'A', 'M'};
constexpr char kCkptMagic[8] = {'E', 'Q', 'A', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("parameter stream truncated");
  return v;
}

void expect_magic(std::istream& is, const char (&magic)[8], const char* what) {
  char got[8];
  is.read(got, 8);
  if (!is || std::memcmp(got, magic, 8) != 0) throw std::runtime_error(std::string("not a ") + what);
}

nlohmann::json network_json(const NetworkConfig& c) {
  return {{"hidden_layers", c.hidden_layers},
          {"channels", c.channels},
          {"baseline_hidden_layers", c.baseline_hidden_layers},
          {"baseline_width", c.baseline_width}};
}

NetworkConfig network_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.hidden_layers = j.at("hidden_layers").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.baseline_hidden_layers = j.at("baseline_hidden_layers").get<std::size_t>();
  c.baseline_width = j.at("baseline_width").get<std::size_t>();
  return c;
}

}  // namespace

void write_parameters(std::ostream& os, const ParameterSet& params) {
  os.write(kParamMagic, 8);
  put(os, kFormatVersion);
  put<std::uint64_t>(os, params.size());
  for (const auto& p : params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(p.value.data().data()),
             static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("failed writing parameters");
}

ParameterSet read_parameters(std::istream& is) {
  expect_magic(is, kParamMagic, "parameter record");
  if (get<std::uint32_t>(is) != kFormatVersion) throw std::runtime_error("unsupported parameter format version");
  const auto count = get<std::uint64_t>(is);
  ParameterSet params;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = get<std::uint32_t>(is);
    if (len > 4096) throw std::runtime_error("corrupt parameter name length");
    std::string name(len, '\0');
    is.read(name.data(), len);
    const auto rank = get<std::uint32_t>(is);
    if (rank > 8) throw std::runtime_error("corrupt parameter rank");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(is));
    Tensor value(shape);
    is.read(reinterpret_cast<char*>(value.data().data()), static_cast<std::streamsize>(value.size() * sizeof(double)));
    if (!is) throw std::runtime_error("parameter stream truncated");
    params.add(std::move(name), std::move(value));
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (!ckpt.mechanism) throw std::invalid_argument("save_checkpoint: no mechanism");
  nlohmann::json meta = {
      {"architecture", to_string(ckpt.mechanism->architecture())},
      {"network", network_json(ckpt.network)},
      {"bidders", ckpt.bidders},
      {"items", ckpt.items},
      {"lambda", ckpt.lagrangian.lambda},
      {"rho", ckpt.lagrangian.rho},
      {"iteration", ckpt.lagrangian.iteration},
      {"config_hash", ckpt.config_hash},
      {"seed", ckpt.seed},
      {"epoch", ckpt.epoch},
      {"code_version", code_version()},
      {"config", ckpt.config},
  };
  const std::string meta_text = meta.dump();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + tmp.string());
    os.write(kCkptMagic, 8);
    put(os, kFormatVersion);
    put<std::uint64_t>(os, meta_text.size());
    os.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
    write_parameters(os, ckpt.mechanism->parameters());
    if (!os) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  expect_magic(is, kCkptMagic, "checkpoint file");
  if (get<std::uint32_t>(is) != kFormatVersion) throw std::runtime_error("unsupported checkpoint version");
  const auto meta_len = get<std::uint64_t>(is);
  if (meta_len > (1u << 26)) throw std::runtime_error("corrupt checkpoint header");
  std::string meta_text(meta_len, '\0');
  is.read(meta_text.data(), static_cast<std::streamsize>(meta_len));
  if (!is) throw std::runtime_error("checkpoint truncated");
  const auto meta = nlohmann::json::parse(meta_text);

  Checkpoint ckpt;
  ckpt.network = network_from_json(meta.at("network"));
  ckpt.bidders = meta.at("bidders").get<std::size_t>();
  ckpt.items = meta.at("items").get<std::size_t>();
  ckpt.lagrangian.lambda = meta.at("lambda").get<std::vector<double>>();
  ckpt.lagrangian.rho = meta.at("rho").get<double>();
  ckpt.lagrangian.iteration = meta.at("iteration").get<std::uint64_t>();
  ckpt.config_hash = meta.at("config_hash").get<std::string>();
  ckpt.seed = meta.at("seed").get<std::uint64_t>();
  ckpt.epoch = meta.at("epoch").get<std::uint64_t>();
  ckpt.config = meta.at("config");

  ParameterSet params = read_parameters(is);
  const Architecture arch = architecture_from_string(meta.at("architecture").get<std::string>());
  if (arch == Architecture::kEquivariant) {
    ckpt.mechanism = std::make_unique<EquivariantNet>(ckpt.network, std::move(params));
  } else {
    ckpt.mechanism = std::make_unique<RegretNet>(ckpt.bidders, ckpt.items, ckpt.network, std::move(params));
  }
  return ckpt;
}

}  // namespace eqa
