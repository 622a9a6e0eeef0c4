#ifndef MPSEQ_CHECKPOINT_HPP_
#define MPSEQ_CHECKPOINT_HPP_

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpseq/ppo.hpp"

namespace mpseq {

using Json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;

inline Json vector_to_json(const Eigen::VectorXd& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vector_from_json(const Json& j) {
  const auto d = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
}

inline Json mlp_to_json(const Mlp& m, const AdamState& opt) {
  return {{"sizes", m.sizes()},
          {"params", vector_to_json(m.parameters())},
          {"adam", {{"m", vector_to_json(opt.m)}, {"v", vector_to_json(opt.v)}, {"t", opt.t}}}};
}

inline void mlp_from_json(const Json& j, Mlp& m, AdamState& opt) {
  Rng dummy(0);
  m = Mlp(j.at("sizes").get<std::vector<int>>(), dummy, 0.0);
  m.set_parameters(vector_from_json(j.at("params")));
  const Json& a = j.at("adam");
  opt.m = vector_from_json(a.at("m"));
  opt.v = vector_from_json(a.at("v"));
  opt.t = a.at("t").get<long>();
  if (opt.m.size() != m.parameter_count() || opt.v.size() != m.parameter_count())
    throw std::runtime_error("checkpoint: optimizer state does not match network size");
}

inline Json bundle_to_json(const PolicyBundle& b) {
  return {{"value", mlp_to_json(b.value, b.value_opt)},
          {"free_head", mlp_to_json(b.free_head, b.free_opt)},
          {"contact_head", mlp_to_json(b.contact_head, b.contact_opt)},
          {"obs_rms",
           {{"mean", vector_to_json(b.obs_rms.mean)},
            {"var", vector_to_json(b.obs_rms.var)},
            {"count", b.obs_rms.count}}}};
}

inline PolicyBundle bundle_from_json(const Json& j) {
  PolicyBundle b;
  mlp_from_json(j.at("value"), b.value, b.value_opt);
  mlp_from_json(j.at("free_head"), b.free_head, b.free_opt);
  mlp_from_json(j.at("contact_head"), b.contact_head, b.contact_opt);
  const Json& r = j.at("obs_rms");
  b.obs_rms.mean = vector_from_json(r.at("mean"));
  b.obs_rms.var = vector_from_json(r.at("var"));
  b.obs_rms.count = r.at("count").get<double>();
  if (b.value.input_size() != kCriticSize || b.value.output_size() != 1 ||
      b.free_head.input_size() != kObsSize || b.contact_head.input_size() != kObsSize ||
      b.obs_rms.mean.size() != kObsSize || b.obs_rms.var.size() != kObsSize)
    throw std::runtime_error("checkpoint: unexpected network shapes");
  return b;
}

struct Checkpoint {
  PolicyBundle bundle;
  Json config = Json::object();
  std::uint64_t seed = 0;
};

inline std::string checkpoint_text(const Checkpoint& c) {
  const Json j = {{"format", "mpseq-policy"},
                  {"version", kCheckpointVersion},
                  {"seed", c.seed},
                  {"config", c.config},
                  {"policy", bundle_to_json(c.bundle)}};
  return j.dump() + "\n";
}

inline Checkpoint checkpoint_from_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: malformed file: ") + e.what());
  }
  if (j.value("format", "") != "mpseq-policy") throw std::runtime_error("checkpoint: not a policy file");
  if (j.value("version", 0) != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  Checkpoint c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.config = j.at("config");
  c.bundle = bundle_from_json(j.at("policy"));
  return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  f << checkpoint_text(c);
  if (!f) throw std::runtime_error("failed writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return checkpoint_from_text(ss.str());
}

}  // namespace mpseq

#endif  // MPSEQ_CHECKPOINT_HPP_
