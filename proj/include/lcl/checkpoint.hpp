#pragma once

// Stage checkpoints: one ParamSet plus a JSON metadata trailer in the common
// container. The trailer records the params digest, the names of frozen
// (non-trainable) tensors, and a self-digest of the trailer itself, so any
// edit to either part is detected on load.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "lcl/cheat.hpp"
#include "lcl/evalviz.hpp"
#include "lcl/policy.hpp"
#include "lcl/tensor.hpp"
#include "lcl/vae.hpp"

namespace lcl {

struct Checkpoint {
  std::string stage;
  ParamSet params;
  nlohmann::json info = nlohmann::json::object();  // model shape, config echo, frozen digests, seed
};

std::string encode_checkpoint(const Checkpoint& ck);
/// FormatError for structural defects; IntegrityError when a digest does not
/// match its content.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint to_checkpoint(const VaeParams& p, nlohmann::json info = nlohmann::json::object());
Checkpoint to_checkpoint(const ControllerParams& p, nlohmann::json info = nlohmann::json::object());
Checkpoint to_checkpoint(const CheatEncoderParams& p, nlohmann::json info = nlohmann::json::object());
Checkpoint to_checkpoint(const BaselineParams& p, nlohmann::json info = nlohmann::json::object());

VaeParams vae_from(const Checkpoint& ck);
ControllerParams controller_from(const Checkpoint& ck);
CheatEncoderParams cheat_from(const Checkpoint& ck);
BaselineParams baseline_from(const Checkpoint& ck);

}  // namespace lcl
