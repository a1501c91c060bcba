#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdaug/core/tensor.hpp"
#include "tdaug/nn/models.hpp"

namespace tdaug::nn {

// Self-describing weight archive: a JSON header with the originating model
// spec and tensor names/shapes, followed by raw little-endian float32 data.
struct CheckpointTensor {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  std::vector<float> data;
};

struct Checkpoint {
  std::string model_kind;   // "generator_deform", "generator_intensity", "discriminator", "segmenter"
  std::string spec_json;    // architecture/config record
  std::vector<CheckpointTensor> tensors;

  std::uint64_t content_hash() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

template <typename T>
Checkpoint snapshot(ModelGraph<T>& model, const std::string& kind,
                    const std::string& spec_json = "{}") {
  Checkpoint ckpt;
  ckpt.model_kind = kind;
  ckpt.spec_json = spec_json;
  for (auto& t : model.state_tensors()) {
    CheckpointTensor ct;
    ct.name = t.name;
    ct.rows = t.value->rows();
    ct.cols = t.value->cols();
    ct.data.resize(static_cast<std::size_t>(t.value->size()));
    Eigen::Map<Eigen::MatrixXf>(ct.data.data(), ct.rows, ct.cols) =
        t.value->template cast<float>();
    ckpt.tensors.push_back(std::move(ct));
  }
  return ckpt;
}

template <typename T>
void restore(ModelGraph<T>& model, const Checkpoint& ckpt) {
  auto tensors = model.state_tensors();
  if (tensors.size() != ckpt.tensors.size())
    throw std::runtime_error("checkpoint: tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& ct = ckpt.tensors[i];
    if (tensors[i].name != ct.name)
      throw std::runtime_error("checkpoint: tensor name mismatch at " + ct.name);
    if (tensors[i].value->rows() != ct.rows || tensors[i].value->cols() != ct.cols)
      throw std::runtime_error("checkpoint: tensor shape mismatch at " + ct.name);
    *tensors[i].value = Eigen::Map<const Eigen::MatrixXf>(ct.data.data(), ct.rows, ct.cols)
                            .cast<T>();
  }
}

}  // namespace tdaug::nn
