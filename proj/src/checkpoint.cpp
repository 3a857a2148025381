#include "lcl/checkpoint.hpp"

#include "lcl/container.hpp"
#include "lcl/digest.hpp"
#include "lcl/errors.hpp"

namespace lcl {

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json trailer_without_digest(const Checkpoint& ck) {
  nlohmann::json frozen = nlohmann::json::array();
  for (const auto& e : ck.params) {
    if (!e.trainable) frozen.push_back(e.name);
  }
  return {{"format", "lcl-checkpoint"},
          {"checkpoint_version", kCheckpointVersion},
          {"stage", ck.stage},
          {"params_digest", params_digest(ck.params)},
          {"non_trainable", frozen},
          {"info", ck.info}};
}

// Layout check against a freshly shaped parameter set of the same model.
void expect_layout(const ParamSet& got, const ParamSet& want, const std::string& stage) {
  if (got.size() != want.size()) {
    throw FormatError(stage + " checkpoint: " + std::to_string(got.size()) + " tensors, model needs " +
                      std::to_string(want.size()));
  }
  auto g = got.begin();
  for (const auto& w : want) {
    if (g->name != w.name || g->value.dims != w.value.dims) {
      throw FormatError(stage + " checkpoint: tensor '" + g->name + "' " + shape_string(g->value.dims) +
                        " does not match model tensor '" + w.name + "' " + shape_string(w.value.dims));
    }
    ++g;
  }
}

const nlohmann::json& model_info(const Checkpoint& ck, const std::string& stage) {
  if (ck.stage != stage) throw FormatError("checkpoint holds stage '" + ck.stage + "', expected '" + stage + "'");
  if (!ck.info.contains("model")) throw FormatError(stage + " checkpoint: metadata lacks the model shape");
  return ck.info.at("model");
}

template <class F>
auto with_json_errors(const std::string& stage, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(stage + " checkpoint: " + e.what());
  }
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
  Container c;
  for (const auto& e : ck.params) c.records.emplace_back(e.name, e.value);
  c.metadata = trailer_without_digest(ck);
  c.metadata["metadata_digest"] = sha256_hex(c.metadata.dump());
  return encode_container(c);
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  const Container c = decode_container(bytes);
  nlohmann::json meta = c.metadata;
  Checkpoint ck;
  std::string stored_meta_digest, stored_params_digest;
  std::vector<std::string> frozen;
  try {
    if (meta.at("format").get<std::string>() != "lcl-checkpoint") throw FormatError("metadata: not a checkpoint");
    if (meta.at("checkpoint_version").get<int>() != kCheckpointVersion) {
      throw FormatError("metadata: unsupported checkpoint version " + meta.at("checkpoint_version").dump());
    }
    stored_meta_digest = meta.at("metadata_digest").get<std::string>();
    stored_params_digest = meta.at("params_digest").get<std::string>();
    ck.stage = meta.at("stage").get<std::string>();
    ck.info = meta.at("info");
    frozen = meta.at("non_trainable").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metadata: ") + e.what());
  }
  meta.erase("metadata_digest");
  if (sha256_hex(meta.dump()) != stored_meta_digest) {
    throw IntegrityError("metadata: digest mismatch (metadata was modified)");
  }
  for (const auto& [name, t] : c.records) {
    try {
      ck.params.add(name, t);
    } catch (const ContractError& e) {
      throw FormatError(std::string("records: ") + e.what());
    }
  }
  for (const auto& name : frozen) {
    if (!ck.params.contains(name)) throw FormatError("metadata: non-trainable tensor '" + name + "' is not stored");
    ck.params.set_trainable(name, false);
  }
  if (params_digest(ck.params) != stored_params_digest) {
    throw IntegrityError("records: parameter digest does not match metadata");
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) { write_file(path, encode_checkpoint(ck)); }

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

Checkpoint to_checkpoint(const VaeParams& p, nlohmann::json info) {
  info["model"] = {{"width", p.width}, {"k", p.k}, {"hidden", p.hidden}};
  return {"vae", p.params, std::move(info)};
}

Checkpoint to_checkpoint(const ControllerParams& p, nlohmann::json info) {
  const ControllerShape& s = p.shape;
  info["model"] = {{"k", s.k},   {"h_dim", s.h_dim}, {"m1", s.m1}, {"m2", s.m2}, {"v_max", s.v_max},
                   {"omega_max", s.omega_max}};
  return {"controller", p.params, std::move(info)};
}

Checkpoint to_checkpoint(const CheatEncoderParams& p, nlohmann::json info) {
  info["model"] = {{"width", p.width}, {"k", p.k}, {"hidden", p.hidden}};
  return {"cheat", p.params, std::move(info)};
}

Checkpoint to_checkpoint(const BaselineParams& p, nlohmann::json info) {
  info["model"] = {{"width", p.width}, {"hidden", p.hidden}};
  return {"baseline", p.params, std::move(info)};
}

VaeParams vae_from(const Checkpoint& ck) {
  return with_json_errors("vae", [&] {
    const auto& m = model_info(ck, "vae");
    VaeParams p = vae_init(m.at("width").get<std::size_t>(), m.at("k").get<std::size_t>(),
                           m.at("hidden").get<std::vector<std::size_t>>(), 0);
    expect_layout(ck.params, p.params, "vae");
    p.params = ck.params;
    return p;
  });
}

ControllerParams controller_from(const Checkpoint& ck) {
  return with_json_errors("controller", [&] {
    const auto& m = model_info(ck, "controller");
    ControllerShape s;
    s.k = m.at("k").get<std::size_t>();
    s.h_dim = m.at("h_dim").get<std::size_t>();
    s.m1 = m.at("m1").get<std::size_t>();
    s.m2 = m.at("m2").get<std::size_t>();
    s.v_max = m.at("v_max").get<double>();
    s.omega_max = m.at("omega_max").get<double>();
    ControllerParams p = controller_zero(s);
    expect_layout(ck.params, p.params, "controller");
    p.params = ck.params;
    return p;
  });
}

CheatEncoderParams cheat_from(const Checkpoint& ck) {
  return with_json_errors("cheat", [&] {
    const auto& m = model_info(ck, "cheat");
    CheatEncoderParams p = cheat_init(m.at("width").get<std::size_t>(), m.at("k").get<std::size_t>(),
                                      m.at("hidden").get<std::vector<std::size_t>>(), 0);
    expect_layout(ck.params, p.params, "cheat");
    p.params = ck.params;
    return p;
  });
}

BaselineParams baseline_from(const Checkpoint& ck) {
  return with_json_errors("baseline", [&] {
    const auto& m = model_info(ck, "baseline");
    BaselineParams p = baseline_init(m.at("width").get<std::size_t>(), m.at("hidden").get<std::vector<std::size_t>>(), 0);
    expect_layout(ck.params, p.params, "baseline");
    p.params = ck.params;
    return p;
  });
}

}  // namespace lcl
