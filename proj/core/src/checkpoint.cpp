#include "hpt/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "hpt/error.hpp"

namespace hpt {
namespace {

constexpr char kMagic[] = "HPTPARAM1";

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorKind::kMalformedRecord, "truncated parameter archive");
  return v;
}

}  // namespace

void save_parameters(const std::filesystem::path& path, const ParameterStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic) - 1);
  write_pod<std::uint64_t>(out, params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    write_pod<std::uint64_t>(out, p.name.size());
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod<std::int64_t>(out, p.value.rows());
    write_pod<std::int64_t>(out, p.value.cols());
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
  }
}

ParameterStore load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open '" + path.string() + "'");
  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw Error(ErrorKind::kMalformedRecord, "'" + path.string() + "' is not a parameter archive");
  }
  ParameterStore store;
  const auto count = read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = read_pod<std::uint64_t>(in);
    if (len > 4096) throw Error(ErrorKind::kMalformedRecord, "parameter name too long");
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    const auto rows = read_pod<std::int64_t>(in);
    const auto cols = read_pod<std::int64_t>(in);
    if (rows < 0 || cols < 0 || rows * cols > (std::int64_t{1} << 32)) {
      throw Error(ErrorKind::kMalformedRecord, "bad tensor shape for '" + name + "'");
    }
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!in) throw Error(ErrorKind::kMalformedRecord, "truncated tensor '" + name + "'");
    store.add(std::move(name), std::move(m));
  }
  return store;
}

KeyValues manifest_entries(const RunConfig& config, const KeyValues& extra) {
  KeyValues kv = to_key_values(config);
  kv.emplace_back("toolkit.version", std::string(kToolkitVersion));
  kv.insert(kv.end(), extra.begin(), extra.end());
  return kv;
}

void save_checkpoint(const std::filesystem::path& dir, const HptModel& model, const KeyValues& extra_manifest) {
  std::filesystem::create_directories(dir);
  save_parameters(dir / "params.bin", model.params());
  model.encoder().vocabulary().save(dir / "vocab.txt");
  model.hierarchy().save(dir / "taxonomy.tsv");
  RunConfig cfg = model.config();
  if (!model.verbalizer_map().empty()) {
    std::ofstream out(dir / "verbalizer.tsv");
    for (const auto& [label, word] : model.verbalizer_map()) out << label << '\t' << word << '\n';
    cfg.verbalizer_map = "verbalizer.tsv";
  }
  save_key_values(dir / "manifest.txt", manifest_entries(cfg, extra_manifest));
}

Checkpoint load_checkpoint(const std::filesystem::path& dir, const KeyValues& overrides) {
  Checkpoint ck;
  for (const auto& [k, v] : load_key_values(dir / "manifest.txt")) {
    if (is_config_key(k)) set_config_value(ck.config, k, v);
  }
  apply_key_values(ck.config, overrides);
  HptModel::VerbalizerMap verbalizers;
  if (ck.config.variant == ModelVariant::kHard) verbalizers = load_verbalizer_map(dir / "verbalizer.tsv");
  ck.model = HptModel::restore(ck.config, LabelHierarchy::load(dir / "taxonomy.tsv"), Vocabulary::load(dir / "vocab.txt"),
                               load_parameters(dir / "params.bin"), std::move(verbalizers));
  return ck;
}

}  // namespace hpt
