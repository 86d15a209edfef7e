#pragma once

#include <map>
#include <string>
#include <vector>

#include "finegrain/tensor.hpp"

namespace finegrain {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameters plus non-trainable buffers (batch-norm running stats).
// Names are unique across both maps and shapes are fixed after creation.
class ParamStore {
 public:
  TensorPtr add_param(const std::string& name, std::vector<int> shape);
  TensorPtr add_buffer(const std::string& name, std::vector<int> shape, double fill = 0.0);
  TensorPtr get(const std::string& name) const;
  bool has(const std::string& name) const;

  void zero_grad();
  void adam_step(const AdamConfig& cfg);
  long step_count() const { return step_; }

  size_t param_count() const;  // total trainable scalar count

  template <class Fn>
  void for_each_param(Fn&& fn) {
    for (auto& [name, t] : params_) fn(name, t);
  }
  template <class Fn>
  void for_each_buffer(Fn&& fn) {
    for (auto& [name, t] : buffers_) fn(name, t);
  }

  // Deep copies of all values (params + buffers) for best-model snapshots.
  std::map<std::string, std::vector<double>> snapshot() const;
  void restore(const std::map<std::string, std::vector<double>>& snap);

  // Checkpoint container: magic, version, JSON header, JSON manifest
  // (name/shape/kind/offset), then float32 little-endian arrays in manifest
  // order. header_json must be a serialized JSON object.
  void save(const std::string& path, const std::string& header_json) const;
  // Loads into already-constructed entries; names and shapes must match.
  // Returns the header JSON string.
  std::string load(const std::string& path);

  // Reads just the header of a checkpoint file.
  static std::string peek_header(const std::string& path);

 private:
  std::map<std::string, TensorPtr> params_;
  std::map<std::string, TensorPtr> buffers_;
  struct Moments {
    std::vector<double> m, v;
  };
  std::map<std::string, Moments> adam_;
  long step_ = 0;
};

}  // namespace finegrain
