#include "cpic/artifact.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cpic {

using nlohmann::json;

namespace {

json matrix_data(const Matrix& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

Matrix matrix_from(const json& data, Index rows, Index cols, const std::string& what) {
  if (!data.is_array() || static_cast<Index>(data.size()) != rows * cols) {
    throw std::runtime_error("model artifact: '" + what + "' should hold " + std::to_string(rows * cols) +
                             " numbers");
  }
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = data.at(static_cast<std::size_t>(r * cols + c)).get<double>();
  return m;
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw std::runtime_error("model artifact: missing field '" + std::string(key) + "' in " + where);
  return j.at(key);
}

void hash_doubles(std::uint64_t& h, const std::vector<double>& values) {
  for (double v : values) {
    unsigned char bytes[sizeof v];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
}

}  // namespace

json config_to_json(const CpicConfig& c) {
  return json{{"latent_dim", c.latent_dim},
              {"window", c.window},
              {"beta", c.beta},
              {"encoder", to_string(c.encoder)},
              {"loss", to_string(c.loss)},
              {"pi", to_string(c.pi)},
              {"compression", to_string(c.compression)},
              {"critic", to_string(c.critic)},
              {"tuba_form", to_string(c.tuba_form)},
              {"learnable_marginal", c.learnable_marginal},
              {"orthonormalize", c.orthonormalize},
              {"preprocess", to_string(c.preprocess)},
              {"batch", c.batch},
              {"steps", c.steps},
              {"lr", c.lr},
              {"seed", c.seed}};
}

CpicConfig config_from_json(const json& j) {
  try {
    CpicConfig c;
    c.latent_dim = j.at("latent_dim").get<int>();
    c.window = j.at("window").get<int>();
    c.beta = j.at("beta").get<double>();
    c.encoder = parse_encoder_mode(j.at("encoder").get<std::string>());
    c.loss = parse_loss_family(j.at("loss").get<std::string>());
    c.pi = parse_pi_estimator(j.at("pi").get<std::string>());
    c.compression = parse_compression(j.at("compression").get<std::string>());
    c.critic = parse_critic_kind(j.at("critic").get<std::string>());
    c.tuba_form = parse_tuba_form(j.at("tuba_form").get<std::string>());
    c.learnable_marginal = j.at("learnable_marginal").get<bool>();
    c.orthonormalize = j.at("orthonormalize").get<bool>();
    c.preprocess = parse_preprocess(j.at("preprocess").get<std::string>());
    c.batch = j.at("batch").get<int>();
    c.steps = j.at("steps").get<int>();
    c.lr = j.at("lr").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::string traces_digest(const TrainReport& report) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  hash_doubles(h, report.loss);
  hash_doubles(h, report.compression);
  hash_doubles(h, report.pi);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ModelArtifact make_artifact(const TrainReport& report) {
  ModelArtifact out;
  out.model = report.model;
  out.traces_digest = traces_digest(report);
  return out;
}

std::string serialize_model(const ModelArtifact& artifact) {
  const CpicModel& m = artifact.model;
  json params = json::array();
  for (ParamId id : m.store.ids()) {
    const Matrix& v = m.store.value(id);
    params.push_back(json{{"name", m.store.name(id)},
                          {"rows", v.rows()},
                          {"cols", v.cols()},
                          {"trainable", m.store.trainable(id)},
                          {"data", matrix_data(v)}});
  }
  const Matrix& u = m.store.value(m.encoder.mean_map());
  json j{{"format_version", artifact.format_version},
         {"config", config_to_json(m.config)},
         {"seed", m.config.seed},
         {"input",
          json{{"dim", m.input_dim}, {"mean", matrix_data(m.input_mean.transpose())}, {"transform", matrix_data(m.input_transform)}}},
         {"encoder",
          json{{"deterministic", m.encoder.deterministic()},
               {"input_dim", u.rows()},
               {"latent_dim", u.cols()},
               {"U", matrix_data(u)}}},
         {"parameters", params},
         {"traces_digest", artifact.traces_digest}};
  return j.dump(2) + "\n";
}

ModelArtifact parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("model artifact: not valid JSON: ") + e.what());
  }
  ModelArtifact out;
  out.format_version = field(j, "format_version", "artifact").get<int>();
  if (out.format_version != kArtifactFormatVersion) {
    throw std::runtime_error("model artifact: format version " + std::to_string(out.format_version) +
                             " is not supported (expected " + std::to_string(kArtifactFormatVersion) + ")");
  }
  const CpicConfig config = config_from_json(field(j, "config", "artifact"));
  const json& input = field(j, "input", "artifact");
  const int n = field(input, "dim", "input").get<int>();
  if (n < 1) throw std::runtime_error("model artifact: input dim must be >= 1");
  out.model = build_model(config, n);
  out.model.input_mean = matrix_from(field(input, "mean", "input"), 1, n, "input.mean").transpose();
  out.model.input_transform = matrix_from(field(input, "transform", "input"), n, n, "input.transform");

  const json& params = field(j, "parameters", "artifact");
  if (!params.is_array() || params.size() != out.model.store.size()) {
    throw std::runtime_error("model artifact: expected " + std::to_string(out.model.store.size()) +
                             " parameters for this config");
  }
  for (const json& p : params) {
    const std::string name = field(p, "name", "parameter").get<std::string>();
    const auto id = out.model.store.find(name);
    if (!id) throw std::runtime_error("model artifact: unknown parameter '" + name + "'");
    Matrix& value = out.model.store.value(*id);
    const Index rows = field(p, "rows", name).get<Index>();
    const Index cols = field(p, "cols", name).get<Index>();
    if (rows != value.rows() || cols != value.cols()) {
      throw std::runtime_error("model artifact: parameter '" + name + "' is " + std::to_string(rows) + "x" +
                               std::to_string(cols) + ", config expects " + std::to_string(value.rows()) + "x" +
                               std::to_string(value.cols()));
    }
    value = matrix_from(field(p, "data", name), rows, cols, name);
    out.model.store.set_trainable(*id, field(p, "trainable", name).get<bool>());
  }
  out.traces_digest = field(j, "traces_digest", "artifact").get<std::string>();
  return out;
}

void save_model(const ModelArtifact& artifact, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_model(artifact);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ModelArtifact load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read model file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_model(text.str());
}

std::string serialize_report(const TrainReport& report) {
  json j{{"config", config_to_json(report.config)},
         {"steps", report.loss.size()},
         {"wall_seconds", report.wall_seconds},
         {"clamp_events", report.clamp_events},
         {"traces_digest", traces_digest(report)},
         {"final", json{{"loss", report.loss.empty() ? 0.0 : report.loss.back()},
                        {"compression", report.compression.empty() ? 0.0 : report.compression.back()},
                        {"pi", report.pi.empty() ? 0.0 : report.pi.back()}}},
         {"traces", json{{"loss", report.loss}, {"compression", report.compression}, {"pi", report.pi}}}};
  return j.dump(2) + "\n";
}

}  // namespace cpic
