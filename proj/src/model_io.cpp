#include "cpm/model_io.hpp"

#include <fstream>

#include "cpm/kpi.hpp"

namespace cpm {

namespace {

nlohmann::json tensor(std::span<const double> data, std::size_t rows, std::size_t cols) {
  return {{"shape", {rows, cols}}, {"data", std::vector<double>(data.begin(), data.end())}};
}

void read_tensor(const nlohmann::json& t, std::size_t rows, std::size_t cols, std::span<double> out,
                 const std::string& name) {
  const auto shape = t.at("shape").get<std::vector<std::size_t>>();
  const auto& data = t.at("data");
  if (shape != std::vector<std::size_t>{rows, cols} || data.size() != rows * cols) {
    throw ShapeError("model file: tensor '" + name + "' has the wrong shape");
  }
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = data[i].get<double>();
}

}  // namespace

nlohmann::json model_to_json(const ForecastModel& model) {
  model.validate();
  const ParamLayout layout(model.config);
  const std::span<const double> p(model.params);
  nlohmann::json tensors = nlohmann::json::object();
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& L = layout.layers[l];
    const auto prefix = "layer" + std::to_string(l);
    tensors[prefix + ".weights"] = tensor(p.subspan(L.w_offset, L.rows * L.cols), L.rows, L.cols);
    tensors[prefix + ".bias"] = tensor(p.subspan(L.b_offset, L.rows), L.rows, 1);
  }
  const auto H = static_cast<std::size_t>(model.config.units_per_layer);
  tensors["head.weights"] = tensor(p.subspan(layout.head_w_offset, layout.output * H), layout.output, H);
  tensors["head.bias"] = tensor(p.subspan(layout.head_b_offset, layout.output), layout.output, 1);

  return {
      {"format", kModelFormat},
      {"version", kModelFormatVersion},
      {"config",
       {{"n_layers", model.config.n_layers},
        {"units_per_layer", model.config.units_per_layer},
        {"input_dim", model.config.input_dim},
        {"output_dim", model.config.output_dim},
        {"cell_activation", "tanh"},
        {"gate_activation", "sigmoid"},
        {"gate_order", "i,f,g,o"}}},
      {"lookback", model.lookback},
      {"trained_epochs", model.trained_epochs},
      {"norm", {{"features", {"prb_util", "ip_throughput"}}, {"min", model.norm.min}, {"max", model.norm.max}}},
      {"tensors", tensors},
  };
}

ForecastModel model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kModelFormat) throw ShapeError("not a forecast model file");
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw ShapeError("unsupported model format version " + std::to_string(version));
    }
    ForecastModel m;
    const auto& c = doc.at("config");
    m.config.n_layers = c.at("n_layers").get<int>();
    m.config.units_per_layer = c.at("units_per_layer").get<int>();
    m.config.input_dim = c.at("input_dim").get<int>();
    m.config.output_dim = c.at("output_dim").get<int>();
    m.lookback = doc.at("lookback").get<int>();
    m.trained_epochs = doc.at("trained_epochs").get<int>();
    m.norm.min = doc.at("norm").at("min").get<std::vector<double>>();
    m.norm.max = doc.at("norm").at("max").get<std::vector<double>>();

    const ParamLayout layout(m.config);
    m.params.assign(layout.total, 0.0);
    const std::span<double> p(m.params);
    const auto& tensors = doc.at("tensors");
    for (std::size_t l = 0; l < layout.layers.size(); ++l) {
      const auto& L = layout.layers[l];
      const auto prefix = "layer" + std::to_string(l);
      read_tensor(tensors.at(prefix + ".weights"), L.rows, L.cols, p.subspan(L.w_offset, L.rows * L.cols),
                  prefix + ".weights");
      read_tensor(tensors.at(prefix + ".bias"), L.rows, 1, p.subspan(L.b_offset, L.rows), prefix + ".bias");
    }
    const auto H = static_cast<std::size_t>(m.config.units_per_layer);
    read_tensor(tensors.at("head.weights"), layout.output, H, p.subspan(layout.head_w_offset, layout.output * H),
                "head.weights");
    read_tensor(tensors.at("head.bias"), layout.output, 1, p.subspan(layout.head_b_offset, layout.output),
                "head.bias");
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const ForecastModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  out << model_to_json(model).dump(1) << '\n';
}

ForecastModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read model file '" + path + "'");
  return model_from_json(nlohmann::json::parse(in));
}

}  // namespace cpm
