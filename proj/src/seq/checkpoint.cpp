#include "ktlab/seq/checkpoint.hpp"

#include "ktlab/error.hpp"
#include "ktlab/io.hpp"

namespace ktlab::seq {

nlohmann::json params_to_json(const ModelParams& params) {
  const auto d = params.dims();
  nlohmann::json blocks = nlohmann::json::object();
  params.for_each_block([&](const std::string& name, std::span<const double> b) {
    blocks[name] = std::vector<double>(b.begin(), b.end());
  });
  return {{"format", "ktlab-model"},
          {"version", kCheckpointVersion},
          {"dims", {{"source_vocab", d.source_vocab}, {"target_vocab", d.target_vocab}, {"hidden", d.hidden}}},
          {"blocks", blocks}};
}

ModelParams params_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "ktlab-model") throw InvalidArgument("checkpoint: not a ktlab model");
    if (j.at("version") != kCheckpointVersion) {
      throw InvalidArgument("checkpoint: unsupported version " + j.at("version").dump());
    }
    const auto& jd = j.at("dims");
    ModelDims dims{jd.at("source_vocab").get<int>(), jd.at("target_vocab").get<int>(),
                   jd.at("hidden").get<int>()};
    ModelParams p = ModelParams::zeros(dims);
    const auto& blocks = j.at("blocks");
    if (blocks.size() != 11) throw InvalidArgument("checkpoint: expected 11 parameter blocks");
    p.for_each_block([&](const std::string& name, std::span<double> b) {
      const auto values = blocks.at(name).get<std::vector<double>>();
      if (values.size() != b.size()) {
        throw InvalidArgument("checkpoint: block " + name + " has " + std::to_string(values.size()) +
                              " values, dims require " + std::to_string(b.size()));
      }
      std::copy(values.begin(), values.end(), b.begin());
    });
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("checkpoint: malformed: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ModelParams& params) {
  write_file_atomic(path, params_to_json(params).dump() + "\n");
}

ModelParams load_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("checkpoint " + path.string() + ": " + e.what());
  }
  return params_from_json(j);
}

}  // namespace ktlab::seq
