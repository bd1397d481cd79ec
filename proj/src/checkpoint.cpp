#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chatgnn/errors.hpp"
#include "chatgnn/model.hpp"

namespace chatgnn {
namespace {

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  return json{{"in_features", c.in_features},
              {"hidden", c.hidden},
              {"classes", c.classes},
              {"layers", c.layers},
              {"use_layer_norm", c.use_layer_norm},
              {"use_projection", c.use_projection},
              {"directed_mode", c.directed_mode},
              {"layer_kind", std::string(to_string(c.layer_kind))},
              {"baseline_wrap", std::string(to_string(c.baseline_wrap))},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.in_features = j.at("in_features").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.classes = j.at("classes").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.use_layer_norm = j.at("use_layer_norm").get<bool>();
  c.use_projection = j.at("use_projection").get<bool>();
  c.directed_mode = j.at("directed_mode").get<bool>();
  c.layer_kind = layer_kind_from_string(j.at("layer_kind").get<std::string>());
  c.baseline_wrap = baseline_wrap_from_string(j.at("baseline_wrap").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string checkpoint_to_string(const ChatGnnModel& m) {
  json params = json::array();
  for (const auto& [name, t] : m.named_parameters()) {
    params.push_back(json{{"name", name},
                          {"shape", {t.rows(), t.cols()}},
                          {"data", std::vector<Real>(t.data().begin(), t.data().end())}});
  }
  json doc{{"format", kCheckpointFormat},
           {"version", kCheckpointVersion},
           {"config", config_to_json(m.config)},
           {"parameters", std::move(params)}};
  return doc.dump(1);
}

ChatGnnModel checkpoint_from_string(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != kCheckpointFormat) {
      throw FormatError("checkpoint: not a " + std::string(kCheckpointFormat) + " document");
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    ChatGnnModel m = init_model(config_from_json(doc.at("config")));

    std::map<std::string, const json*> stored;
    for (const auto& p : doc.at("parameters")) stored[p.at("name").get<std::string>()] = &p;
    const auto expected = m.named_parameters();
    if (stored.size() != expected.size()) {
      throw FormatError("checkpoint: " + std::to_string(stored.size()) +
                        " parameters stored, configuration implies " +
                        std::to_string(expected.size()));
    }
    for (auto [name, tensor] : expected) {
      const auto it = stored.find(name);
      if (it == stored.end()) throw FormatError("checkpoint: missing parameter '" + name + "'");
      const json& p = *it->second;
      const auto shape = p.at("shape").get<std::vector<std::size_t>>();
      const auto values = p.at("data").get<std::vector<Real>>();
      if (shape.size() != 2 || shape[0] != tensor.rows() || shape[1] != tensor.cols() ||
          values.size() != tensor.size()) {
        throw FormatError("checkpoint: parameter '" + name + "' has shape/data mismatch, expected " +
                          tensor.shape_string());
      }
      std::copy(values.begin(), values.end(), tensor.data().begin());
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ChatGnnModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << checkpoint_to_string(m) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ChatGnnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_string(buffer.str());
}

}  // namespace chatgnn
