#include "tripletnet/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace tripletnet {

namespace {

constexpr uint32_t kModelMagic = 0x4b434e54;  // "TNCK"
constexpr uint32_t kStateMagic = 0x53524e54;  // "TNRS"
constexpr uint32_t kVersion = 1;

template <typename T>
constexpr uint32_t dtype_code() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? 1 : 2;
}

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

void put_string(std::ostream& os, const std::string& s) {
  if (s.size() > 0xffff) throw ValueError("checkpoint: string too long");
  const uint16_t n = uint16_t(s.size());
  os.write(reinterpret_cast<const char*>(&n), 2);
  os.write(s.data(), std::streamsize(s.size()));
}

uint32_t get_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw DataError("checkpoint: truncated file");
  return v;
}

uint64_t get_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  if (!is) throw DataError("checkpoint: truncated file");
  return v;
}

std::string get_string(std::istream& is) {
  uint16_t n = 0;
  is.read(reinterpret_cast<char*>(&n), 2);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw DataError("checkpoint: truncated file");
  return s;
}

template <typename T>
void put_tensor(std::ostream& os, const std::string& name, const Tensor<T>& t) {
  put_string(os, name);
  put_u32(os, uint32_t(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) put_u32(os, uint32_t(t.dim(i)));
  os.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.numel() * sizeof(T)));
}

template <typename T>
NamedTensor<T> get_tensor(std::istream& is) {
  NamedTensor<T> nt;
  nt.name = get_string(is);
  const uint32_t ndim = get_u32(is);
  if (ndim > 8) throw DataError("checkpoint: implausible tensor rank");
  std::vector<int> shape(ndim);
  for (auto& d : shape) d = int(get_u32(is));
  nt.tensor = Tensor<T>(shape);
  is.read(reinterpret_cast<char*>(nt.tensor.data()),
          std::streamsize(nt.tensor.numel() * sizeof(T)));
  if (!is) throw DataError("checkpoint: truncated tensor payload");
  return nt;
}

void put_arch(std::ostream& os, const ArchConfig& arch) {
  put_u32(os, uint32_t(arch.in_channels));
  put_u32(os, uint32_t(arch.in_height));
  put_u32(os, uint32_t(arch.in_width));
  put_u32(os, uint32_t(arch.blocks.size()));
  for (const auto& [convs, filters] : arch.blocks) {
    put_u32(os, uint32_t(convs));
    put_u32(os, uint32_t(filters));
  }
  put_u32(os, uint32_t(arch.embedding_dim));
}

ArchConfig get_arch(std::istream& is) {
  ArchConfig arch;
  arch.in_channels = int(get_u32(is));
  arch.in_height = int(get_u32(is));
  arch.in_width = int(get_u32(is));
  const uint32_t nb = get_u32(is);
  if (nb > 64) throw DataError("checkpoint: implausible block count");
  arch.blocks.resize(nb);
  for (auto& [convs, filters] : arch.blocks) {
    convs = int(get_u32(is));
    filters = int(get_u32(is));
  }
  arch.embedding_dim = int(get_u32(is));
  return arch;
}

class AtomicFileWriter {
 public:
  explicit AtomicFileWriter(const std::string& path)
      : path_(path), tmp_(path + ".tmp"), os_(tmp_, std::ios::binary | std::ios::trunc) {
    if (!os_) throw DataError("cannot open for writing: " + tmp_);
  }

  std::ofstream& stream() { return os_; }

  void commit() {
    os_.flush();
    if (!os_) throw DataError("write failed: " + tmp_);
    os_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec) throw DataError("cannot move " + tmp_ + " to " + path_ + ": " + ec.message());
    committed_ = true;
  }

  ~AtomicFileWriter() {
    if (!committed_) {
      os_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

 private:
  std::string path_, tmp_;
  std::ofstream os_;
  bool committed_ = false;
};

}  // namespace

template <typename T>
void save_model(const std::string& path, Model<T>& model, const std::string& kind,
                const std::vector<NamedTensor<T>>& extra) {
  AtomicFileWriter out(path);
  auto& os = out.stream();
  put_u32(os, kModelMagic);
  put_u32(os, kVersion);
  put_u32(os, dtype_code<T>());
  put_string(os, kind);
  put_arch(os, model.arch);
  auto params = model.parameters();
  auto state = model.state_tensors();
  put_u32(os, uint32_t(params.size() + state.size() + extra.size()));
  for (const auto& nt : params) put_tensor(os, nt.name, nt.tensor);
  for (const auto& nt : state) put_tensor(os, nt.name, nt.tensor);
  for (const auto& nt : extra) put_tensor(os, nt.name, nt.tensor);
  out.commit();
}

template <typename T>
LoadedModel<T> load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  if (get_u32(is) != kModelMagic) throw DataError("not a model checkpoint: " + path);
  if (get_u32(is) != kVersion) throw DataError("unsupported checkpoint version: " + path);
  if (get_u32(is) != dtype_code<T>()) throw DataError("checkpoint precision mismatch: " + path);

  LoadedModel<T> out;
  out.kind = get_string(is);
  const ArchConfig arch = get_arch(is);
  out.model = build_network<T>(arch);

  const uint32_t count = get_u32(is);
  auto params = out.model.parameters();
  auto state = out.model.state_tensors();
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor<T> nt = get_tensor<T>(is);
    bool placed = false;
    for (auto& dst : params) {
      if (dst.name == nt.name) {
        if (dst.tensor.shape() != nt.tensor.shape())
          throw DataError("checkpoint tensor shape mismatch: " + nt.name);
        std::copy(nt.tensor.data(), nt.tensor.data() + nt.tensor.numel(), dst.tensor.data());
        placed = true;
        break;
      }
    }
    if (!placed) {
      for (auto& dst : state) {
        if (dst.name == nt.name) {
          if (dst.tensor.shape() != nt.tensor.shape())
            throw DataError("checkpoint tensor shape mismatch: " + nt.name);
          std::copy(nt.tensor.data(), nt.tensor.data() + nt.tensor.numel(), dst.tensor.data());
          placed = true;
          break;
        }
      }
    }
    if (!placed) out.extra.push_back(std::move(nt));
  }
  return out;
}

template <typename T>
void save_run_state(const std::string& path, const RunState<T>& state) {
  AtomicFileWriter out(path);
  auto& os = out.stream();
  put_u32(os, kStateMagic);
  put_u32(os, kVersion);
  put_u32(os, dtype_code<T>());
  put_u64(os, uint64_t(state.next_iteration));
  put_u64(os, uint64_t(state.adam_t));
  put_u32(os, uint32_t(state.moment1.size()));
  for (const auto& nt : state.moment1) put_tensor(os, nt.name, nt.tensor);
  put_u32(os, uint32_t(state.moment2.size()));
  for (const auto& nt : state.moment2) put_tensor(os, nt.name, nt.tensor);
  out.commit();
}

template <typename T>
RunState<T> load_run_state(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open run state: " + path);
  if (get_u32(is) != kStateMagic) throw DataError("not a run-state file: " + path);
  if (get_u32(is) != kVersion) throw DataError("unsupported run-state version: " + path);
  if (get_u32(is) != dtype_code<T>()) throw DataError("run-state precision mismatch: " + path);
  RunState<T> state;
  state.next_iteration = int64_t(get_u64(is));
  state.adam_t = int64_t(get_u64(is));
  const uint32_t n1 = get_u32(is);
  for (uint32_t i = 0; i < n1; ++i) state.moment1.push_back(get_tensor<T>(is));
  const uint32_t n2 = get_u32(is);
  for (uint32_t i = 0; i < n2; ++i) state.moment2.push_back(get_tensor<T>(is));
  return state;
}

#define TRIPLETNET_INSTANTIATE_CKPT(T)                                                      \
  template void save_model<T>(const std::string&, Model<T>&, const std::string&,            \
                              const std::vector<NamedTensor<T>>&);                          \
  template LoadedModel<T> load_model<T>(const std::string&);                                \
  template void save_run_state<T>(const std::string&, const RunState<T>&);                  \
  template RunState<T> load_run_state<T>(const std::string&);

TRIPLETNET_INSTANTIATE_CKPT(float)
TRIPLETNET_INSTANTIATE_CKPT(double)

#undef TRIPLETNET_INSTANTIATE_CKPT

}  // namespace tripletnet
