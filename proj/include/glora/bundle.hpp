#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "glora/adapters.hpp"
#include "glora/container.hpp"
#include "glora/model.hpp"

namespace glora {

// The only personalized state: adapter tensors plus metadata, stored as
// f32 on the wire (training upcasts to f64 and rounds back on return).
struct AdapterBundle {
  AdapterKind kind = AdapterKind::Lora;
  int rank = 0;
  uint64_t fingerprint = 0;  // of the serving ModelConfig
  std::map<std::string, Tensor> entries;

  // attach-point names recovered from entry names
  std::vector<std::string> attach_points() const;
};

std::vector<uint8_t> serialize_bundle(const AdapterBundle& b);
AdapterBundle deserialize_bundle(const uint8_t* data, size_t n);
AdapterBundle deserialize_bundle(const std::vector<uint8_t>& data);

// Rounds every tensor through f32 (the wire precision).
AdapterBundle bundle_from_adapter(const Adapter& adapter, uint64_t fingerprint);

void save_bundle(const AdapterBundle& b, const std::string& path);
AdapterBundle load_bundle(const std::string& path);

// Base-model checkpoints reuse the container with kind code 255 and f64
// payloads.
std::vector<uint8_t> serialize_checkpoint(const SeqModel& model);
SeqModel deserialize_checkpoint(const uint8_t* data, size_t n);
void save_checkpoint(const SeqModel& model, const std::string& path);
SeqModel load_checkpoint(const std::string& path);

}  // namespace glora
