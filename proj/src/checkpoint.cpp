#include "alsn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace alsn {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == data_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n)
      throw std::runtime_error(path_ + ": truncated checkpoint while reading " + what + " at byte " +
                               std::to_string(pos_) + " (need " + std::to_string(n) + ", have " +
                               std::to_string(data_.size() - pos_) + ")");
  }

  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::string out = "ALSN";
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    put_u32(out, static_cast<std::uint32_t>(nt.name.size()));
    out += nt.name;
    put_u32(out, static_cast<std::uint32_t>(nt.tensor.shape.size()));
    for (int d : nt.tensor.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : nt.tensor.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  // Write-then-rename so an interrupted write never leaves a torn file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path.string());
  if (r.bytes(4, "magic") != "ALSN") throw std::runtime_error(path.string() + ": bad magic, not an ALSN checkpoint");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = r.u32("tensor count");
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    NamedTensor nt;
    const std::uint32_t name_len = r.u32("name length");
    nt.name = r.bytes(name_len, "name");
    const std::uint32_t ndim = r.u32("ndim");
    Shape shape;
    for (std::uint32_t i = 0; i < ndim; ++i) shape.push_back(static_cast<int>(r.u32("dims")));
    nt.tensor = Tensor<float>(shape);
    for (float& v : nt.tensor.values) v = std::bit_cast<float>(r.u32("values"));
    out.push_back(std::move(nt));
  }
  if (!r.at_end())
    throw std::runtime_error(path.string() + ": trailing bytes after tensor " + std::to_string(count));
  return out;
}

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::vector<NamedTensor> export_parameters(const ParameterSet<float>& params, bool with_optimizer_state) {
  std::vector<NamedTensor> out;
  for (const auto& p : params.items()) {
    out.push_back({p.name, Tensor<float>(p.value.shape, p.value.values)});
    if (!with_optimizer_state) continue;
    out.push_back({p.name + "/adam_m", Tensor<float>(p.value.shape, p.adam_m)});
    out.push_back({p.name + "/adam_v", Tensor<float>(p.value.shape, p.adam_v)});
    out.push_back({p.name + "/adam_t", Tensor<float>({1}, {static_cast<float>(p.adam_steps)})});
  }
  return out;
}

void import_parameters(ParameterSet<float>& params, const std::vector<NamedTensor>& tensors) {
  for (auto& p : params.items()) {
    const NamedTensor* v = find_tensor(tensors, p.name);
    if (!v) throw std::runtime_error("checkpoint has no tensor named " + p.name);
    if (v->tensor.shape != p.value.shape)
      throw std::runtime_error("checkpoint tensor " + p.name + " has shape " + shape_string(v->tensor.shape) +
                               ", expected " + shape_string(p.value.shape));
    p.value.values = v->tensor.values;
    p.value.zero_grad();
    const NamedTensor* m = find_tensor(tensors, p.name + "/adam_m");
    const NamedTensor* s = find_tensor(tensors, p.name + "/adam_v");
    const NamedTensor* t = find_tensor(tensors, p.name + "/adam_t");
    if (m && s && t) {
      p.adam_m = m->tensor.values;
      p.adam_v = s->tensor.values;
      p.adam_steps = static_cast<std::int64_t>(t->tensor.values.at(0));
    } else {
      p.adam_m.assign(p.value.size(), 0.0f);
      p.adam_v.assign(p.value.size(), 0.0f);
      p.adam_steps = 0;
    }
  }
}

}  // namespace alsn
