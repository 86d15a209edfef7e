#include "finegrain/optim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace finegrain {

using nlohmann::json;

TensorPtr ParamStore::add_param(const std::string& name, std::vector<int> shape) {
  if (has(name)) throw ConfigError("duplicate parameter name: " + name);
  auto t = make_tensor(std::move(shape), 0.0, true);
  params_[name] = t;
  adam_[name] = Moments{std::vector<double>(t->size(), 0.0), std::vector<double>(t->size(), 0.0)};
  return t;
}

TensorPtr ParamStore::add_buffer(const std::string& name, std::vector<int> shape, double fill) {
  if (has(name)) throw ConfigError("duplicate buffer name: " + name);
  auto t = make_tensor(std::move(shape), fill, false);
  buffers_[name] = t;
  return t;
}

TensorPtr ParamStore::get(const std::string& name) const {
  if (auto it = params_.find(name); it != params_.end()) return it->second;
  if (auto it = buffers_.find(name); it != buffers_.end()) return it->second;
  throw ContractError("unknown parameter: " + name);
}

bool ParamStore::has(const std::string& name) const {
  return params_.count(name) > 0 || buffers_.count(name) > 0;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) t->zero_grad();
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  ++step_;
  double bc1 = 1.0 - std::pow(cfg.beta1, step_);
  double bc2 = 1.0 - std::pow(cfg.beta2, step_);
  for (auto& [name, t] : params_) {
    if (t->grad.empty()) continue;
    auto& mom = adam_[name];
    for (size_t i = 0; i < t->size(); ++i) {
      double g = t->grad[i];
      mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g;
      mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g * g;
      double mhat = mom.m[i] / bc1;
      double vhat = mom.v[i] / bc2;
      t->values[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

size_t ParamStore::param_count() const {
  size_t n = 0;
  for (const auto& [name, t] : params_) n += t->size();
  return n;
}

std::map<std::string, std::vector<double>> ParamStore::snapshot() const {
  std::map<std::string, std::vector<double>> snap;
  for (const auto& [name, t] : params_) snap[name] = t->values;
  for (const auto& [name, t] : buffers_) snap[name] = t->values;
  return snap;
}

void ParamStore::restore(const std::map<std::string, std::vector<double>>& snap) {
  for (const auto& [name, vals] : snap) {
    auto t = get(name);
    if (t->size() != vals.size()) throw ContractError("snapshot size mismatch for " + name);
    t->values = vals;
  }
}

namespace {

constexpr char kMagic[4] = {'F', 'G', 'C', 'P'};
constexpr uint32_t kFormatVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(const std::string& s, size_t& pos) {
  if (pos + 4 > s.size()) throw std::runtime_error("checkpoint truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

void append_f32_le(std::string& out, const std::vector<double>& vals) {
  for (double d : vals) {
    float f = static_cast<float>(d);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
}

}  // namespace

void ParamStore::save(const std::string& path, const std::string& header_json) const {
  json manifest = json::array();
  std::string data;
  uint64_t offset = 0;
  auto emit = [&](const std::string& name, const TensorPtr& t, const char* kind) {
    manifest.push_back({{"name", name}, {"shape", t->shape}, {"kind", kind}, {"offset", offset}});
    append_f32_le(data, t->values);
    offset += 4 * t->size();
  };
  for (const auto& [name, t] : params_) emit(name, t, "param");
  for (const auto& [name, t] : buffers_) emit(name, t, "buffer");

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<uint32_t>(header_json.size()));
  out += header_json;
  std::string mstr = manifest.dump();
  put_u32(out, static_cast<uint32_t>(mstr.size()));
  out += mstr;
  out += data;
  write_text_file(path, out);
}

std::string ParamStore::load(const std::string& path) {
  std::string blob = read_text_file(path);
  size_t pos = 0;
  if (blob.size() < 4 || std::memcmp(blob.data(), kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  pos = 4;
  uint32_t version = get_u32(blob, pos);
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  uint32_t hlen = get_u32(blob, pos);
  std::string header = blob.substr(pos, hlen);
  pos += hlen;
  uint32_t mlen = get_u32(blob, pos);
  json manifest = json::parse(blob.substr(pos, mlen));
  pos += mlen;
  size_t data_start = pos;
  for (const auto& entry : manifest) {
    std::string name = entry.at("name").get<std::string>();
    std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    uint64_t offset = entry.at("offset").get<uint64_t>();
    auto t = get(name);
    if (t->shape != shape) {
      throw std::runtime_error("checkpoint shape mismatch for " + name + ": file has " +
                               shape_str(shape) + ", model has " + shape_str(t->shape));
    }
    size_t start = data_start + offset;
    if (start + 4 * t->size() > blob.size()) throw std::runtime_error("checkpoint truncated");
    for (size_t i = 0; i < t->size(); ++i) {
      uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) {
        bits |= static_cast<uint32_t>(static_cast<unsigned char>(blob[start + 4 * i + k])) << (8 * k);
      }
      float f;
      std::memcpy(&f, &bits, 4);
      t->values[i] = static_cast<double>(f);
    }
  }
  return header;
}

std::string ParamStore::peek_header(const std::string& path) {
  std::string blob = read_text_file(path);
  if (blob.size() < 4 || std::memcmp(blob.data(), kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  size_t pos = 4;
  get_u32(blob, pos);  // version
  uint32_t hlen = get_u32(blob, pos);
  return blob.substr(pos, hlen);
}

}  // namespace finegrain
