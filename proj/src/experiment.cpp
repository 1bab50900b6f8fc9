#include "cpm/experiment.hpp"

#include <fstream>
#include <set>

#include "cpm/model_io.hpp"
#include "cpm/rng.hpp"
#include "cpm/split.hpp"

namespace cpm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads known keys of one JSON object and rejects the rest.
class Reader {
 public:
  Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ValidationError(where_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) throw ValidationError(where_ + ": unknown key '" + k + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ValidationError(where_ + "." + key + ": wrong type");
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_rule(const json& j, CongestionRule& r, const std::string& where) {
  Reader rd(j, where);
  rd.get("throughput_max", r.throughput_max);
  rd.get("prb_min", r.prb_min);
}

json rule_to_json(const CongestionRule& r) { return {{"throughput_max", r.throughput_max}, {"prb_min", r.prb_min}}; }

std::string format_name(TimestampFormat f) { return f == TimestampFormat::Iso8601Hour ? "iso8601_hour" : "hour_index"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

fs::path prepare_output(const ScenarioConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_json(dir / "config.json", scenario_to_json(cfg));
  return dir;
}

std::string model_file_name(const CellId& c) {
  return std::to_string(c.enb) + "_" + std::to_string(c.cell) + "_" + std::to_string(c.generation) + ".json";
}

}  // namespace

void ScenarioConfig::validate() const {
  if (traffic.source == TrafficConfig::Source::Synthetic) {
    traffic.profile.validate();
  } else if (traffic.csv_path.empty()) {
    throw ValidationError("traffic: csv source needs a path");
  }
  traffic.schema.validate();
  if (traffic.throughput_cap && !(*traffic.throughput_cap > 0.0)) {
    throw ValidationError("traffic: throughput_cap must be > 0");
  }
  rule.validate();
  lstm.validate();
  training.validate();
  loop.validate();
  SplitPolicy s = split;
  s.max_factor = loop.max_split_factor;
  s.validate();
  if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
}

ScenarioConfig ScenarioConfig::resolved() const {
  ScenarioConfig r = *this;
  r.traffic.profile.seed = derive_seed(seed, {1});
  r.training.seed = derive_seed(seed, {2});
  r.split.seed = derive_seed(seed, {3});
  r.split.max_factor = loop.max_split_factor;
  return r;
}

ScenarioConfig scenario_from_json(const json& doc, ScenarioConfig cfg) {
  Reader top(doc, "config");
  top.get("seed", cfg.seed);
  top.get("output_dir", cfg.output_dir);
  if (const json* t = top.child("traffic")) {
    Reader rd(*t, "traffic");
    std::string source = cfg.traffic.source == TrafficConfig::Source::Csv ? "csv" : "synthetic";
    rd.get("source", source);
    if (source == "synthetic") {
      cfg.traffic.source = TrafficConfig::Source::Synthetic;
    } else if (source == "csv") {
      cfg.traffic.source = TrafficConfig::Source::Csv;
    } else {
      throw ValidationError("traffic.source must be 'synthetic' or 'csv'");
    }
    if (const json* p = rd.child("profile")) {
      auto& pr = cfg.traffic.profile;
      Reader pp(*p, "traffic.profile");
      pp.get("n_enb", pr.n_enb);
      pp.get("cells_per_enb", pr.cells_per_enb);
      pp.get("n_days", pr.n_days);
      pp.get("diurnal_amplitude", pr.diurnal_amplitude);
      pp.get("base_prb_util", pr.base_prb_util);
      pp.get("peak_prb_util", pr.peak_prb_util);
      pp.get("throughput_at_zero_load", pr.throughput_at_zero_load);
      pp.get("noise_std", pr.noise_std);
      pp.get("congested_cell_fraction", pr.congested_cell_fraction);
    }
    if (const json* c = rd.child("csv")) {
      Reader cc(*c, "traffic.csv");
      cc.get("path", cfg.traffic.csv_path);
      std::vector<std::string> cols(cfg.traffic.schema.columns.begin(), cfg.traffic.schema.columns.end());
      cc.get("columns", cols);
      if (cols.size() != 5) throw ValidationError("traffic.csv.columns needs 5 names");
      std::copy(cols.begin(), cols.end(), cfg.traffic.schema.columns.begin());
      std::string fmt = format_name(cfg.traffic.schema.timestamp_format);
      cc.get("timestamp_format", fmt);
      if (fmt == "iso8601_hour") {
        cfg.traffic.schema.timestamp_format = TimestampFormat::Iso8601Hour;
      } else if (fmt == "hour_index") {
        cfg.traffic.schema.timestamp_format = TimestampFormat::HourIndex;
      } else {
        throw ValidationError("traffic.csv.timestamp_format must be 'iso8601_hour' or 'hour_index'");
      }
      cc.get("epoch", cfg.traffic.schema.epoch);
    }
    if (const json* cap = rd.child("throughput_cap")) {
      if (cap->is_null()) {
        cfg.traffic.throughput_cap.reset();
      } else if (cap->is_number()) {
        cfg.traffic.throughput_cap = cap->get<double>();
      } else {
        throw ValidationError("traffic.throughput_cap: wrong type");
      }
    }
  }
  if (const json* r = top.child("rule")) read_rule(*r, cfg.rule, "rule");
  if (const json* l = top.child("lstm")) {
    Reader rd(*l, "lstm");
    rd.get("n_layers", cfg.lstm.n_layers);
    rd.get("units_per_layer", cfg.lstm.units_per_layer);
    rd.get("input_dim", cfg.lstm.input_dim);
    rd.get("output_dim", cfg.lstm.output_dim);
  }
  if (const json* t = top.child("training")) {
    Reader rd(*t, "training");
    rd.get("batch_size", cfg.training.batch_size);
    rd.get("epochs", cfg.training.epochs);
    rd.get("lookback", cfg.training.lookback);
    rd.get("train_fraction", cfg.training.train_fraction);
    if (const json* a = rd.child("adam")) {
      Reader ad(*a, "training.adam");
      ad.get("lr", cfg.training.adam.lr);
      ad.get("beta1", cfg.training.adam.beta1);
      ad.get("beta2", cfg.training.adam.beta2);
      ad.get("epsilon", cfg.training.adam.epsilon);
    }
  }
  if (const json* l = top.child("loop")) {
    Reader rd(*l, "loop");
    auto& lp = cfg.loop;
    rd.get("period_hours", lp.period_hours);
    rd.get("retrain_accuracy", lp.retrain_accuracy);
    rd.get("feedback_window_hours", lp.feedback_window_hours);
    if (const json* r = rd.child("target_rule")) read_rule(*r, lp.target_rule, "loop.target_rule");
    rd.get("max_congested_hours", lp.max_congested_hours);
    rd.get("target_window_hours", lp.target_window_hours);
    rd.get("max_split_factor", lp.max_split_factor);
    rd.get("horizon_hours", lp.horizon_hours);
    rd.get("min_history_hours", lp.min_history_hours);
  }
  if (const json* s = top.child("split")) {
    Reader rd(*s, "split");
    rd.get("r_min", cfg.split.r_min);
    rd.get("r_max", cfg.split.r_max);
  }
  return cfg;
}

json scenario_to_json(const ScenarioConfig& c) {
  const auto& p = c.traffic.profile;
  const auto& sc = c.traffic.schema;
  const ScenarioConfig derived = c.resolved();
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"traffic",
       {{"source", c.traffic.source == TrafficConfig::Source::Csv ? "csv" : "synthetic"},
        {"profile",
         {{"n_enb", p.n_enb},
          {"cells_per_enb", p.cells_per_enb},
          {"n_days", p.n_days},
          {"diurnal_amplitude", p.diurnal_amplitude},
          {"base_prb_util", p.base_prb_util},
          {"peak_prb_util", p.peak_prb_util},
          {"throughput_at_zero_load", p.throughput_at_zero_load},
          {"noise_std", p.noise_std},
          {"congested_cell_fraction", p.congested_cell_fraction}}},
        {"csv",
         {{"path", c.traffic.csv_path},
          {"columns", std::vector<std::string>(sc.columns.begin(), sc.columns.end())},
          {"timestamp_format", format_name(sc.timestamp_format)},
          {"epoch", sc.epoch}}},
        {"throughput_cap", c.traffic.throughput_cap ? json(*c.traffic.throughput_cap) : json(nullptr)}}},
      {"rule", rule_to_json(c.rule)},
      {"lstm",
       {{"n_layers", c.lstm.n_layers},
        {"units_per_layer", c.lstm.units_per_layer},
        {"input_dim", c.lstm.input_dim},
        {"output_dim", c.lstm.output_dim}}},
      {"training",
       {{"batch_size", c.training.batch_size},
        {"epochs", c.training.epochs},
        {"lookback", c.training.lookback},
        {"train_fraction", c.training.train_fraction},
        {"adam",
         {{"lr", c.training.adam.lr},
          {"beta1", c.training.adam.beta1},
          {"beta2", c.training.adam.beta2},
          {"epsilon", c.training.adam.epsilon}}}}},
      {"loop",
       {{"period_hours", c.loop.period_hours},
        {"retrain_accuracy", c.loop.retrain_accuracy},
        {"feedback_window_hours", c.loop.feedback_window_hours},
        {"target_rule", rule_to_json(c.loop.target_rule)},
        {"max_congested_hours", c.loop.max_congested_hours},
        {"target_window_hours", c.loop.target_window_hours},
        {"max_split_factor", c.loop.max_split_factor},
        {"horizon_hours", c.loop.horizon_hours},
        {"min_history_hours", c.loop.min_history_hours}}},
      {"split", {{"r_min", c.split.r_min}, {"r_max", c.split.r_max}}},
      {"derived_seeds",
       {{"traffic", derived.traffic.profile.seed}, {"training", derived.training.seed}, {"split", derived.split.seed}}},
  };
}

ScenarioConfig load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  if (doc.is_object()) doc.erase("derived_seeds");  // echoes are accepted back as input
  return scenario_from_json(doc);
}

std::vector<KpiSeries> load_traffic(const ScenarioConfig& cfg) {
  if (cfg.traffic.source == TrafficConfig::Source::Synthetic) return generate_synthetic(cfg.traffic.profile);
  return ingest_csv_file(cfg.traffic.csv_path, cfg.traffic.schema);
}

std::vector<double> throughput_caps(const ScenarioConfig& cfg, const std::vector<KpiSeries>& traffic) {
  std::vector<double> caps;
  for (const auto& s : traffic) {
    if (cfg.traffic.throughput_cap) {
      caps.push_back(*cfg.traffic.throughput_cap);
    } else if (cfg.traffic.source == TrafficConfig::Source::Synthetic) {
      caps.push_back(cfg.traffic.profile.throughput_at_zero_load);
    } else {
      double top = 0.0;
      for (const auto& k : s.samples()) top = std::max(top, k.ip_throughput);
      caps.push_back(top > 0.0 ? top : 1.0);
    }
  }
  return caps;
}

GenerateResult cmd_generate(const ScenarioConfig& in) {
  in.validate();
  const ScenarioConfig cfg = in.resolved();
  const auto traffic = load_traffic(cfg);
  const fs::path dir = prepare_output(cfg);
  GenerateResult r{dir / "dataset.csv", traffic.size(), traffic.empty() ? Hour{0} : static_cast<Hour>(traffic.front().size())};
  write_text(r.dataset, export_csv(traffic, cfg.traffic.schema));
  json elevated = json::array();
  if (cfg.traffic.source == TrafficConfig::Source::Synthetic) {
    for (const auto& c : elevated_cells(cfg.traffic.profile)) elevated.push_back(c.to_string());
  }
  write_json(dir / "manifest.json", {{"dataset", "dataset.csv"},
                                     {"cells", r.cells},
                                     {"hours", r.hours},
                                     {"elevated_cells", elevated},
                                     {"config", scenario_to_json(cfg)}});
  return r;
}

json TrainReport::to_json() const {
  json per = json::object();
  for (std::size_t i = 0; i < cells.size(); ++i) per[cells[i].to_string()] = accuracy[i];
  return {{"metric", "accuracy = 100 - MAPE over held-out hours, percent"},
          {"cells", per},
          {"failures", failures},
          {"mean_accuracy", mean_accuracy}};
}

TrainReport cmd_train(const ScenarioConfig& in, const fs::path& dataset) {
  in.validate();
  const ScenarioConfig cfg = in.resolved();
  if (dataset.empty()) throw ValidationError("train: a dataset path is required");
  if (!fs::exists(dataset)) throw ValidationError("train: dataset " + dataset.string() + " not found");
  const auto series = ingest_csv_file(dataset.string(), cfg.traffic.schema);
  const fs::path dir = prepare_output(cfg);
  fs::create_directories(dir / "models");

  TrainReport report;
  std::ostringstream losses;
  std::ostringstream preds;
  losses << "cell,epoch,train_loss,validation_loss\n";
  preds << "cell,hour,prb_util,prb_util_predicted,ip_throughput,ip_throughput_predicted\n";
  const auto results = train_each(series, cfg.lstm, cfg.training);
  double sum = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& t = results[i];
    if (!t.result) {
      report.failures.push_back(t.cell.to_string() + ": " + t.error);
      continue;
    }
    const auto& model = t.result->model;
    save_model(model, (dir / "models" / model_file_name(t.cell)).string());
    report.cells.push_back(t.cell);
    report.accuracy.push_back(t.result->log.holdout_accuracy);
    sum += t.result->log.holdout_accuracy;
    for (const auto& e : t.result->log.epochs) {
      losses << t.cell.to_string() << ',' << e.epoch << ',' << format_double(e.train_loss) << ','
             << format_double(e.validation_loss) << '\n';
    }
    const auto& s = series[i];
    for (const auto& p : holdout_predictions(model, s, cfg.training)) {
      const auto& a = s[static_cast<std::size_t>(p.timestamp - s.first_hour())];
      preds << t.cell.to_string() << ',' << p.timestamp << ',' << format_double(a.prb_util) << ','
            << format_double(p.prb_util) << ',' << format_double(a.ip_throughput) << ','
            << format_double(p.ip_throughput) << '\n';
    }
  }
  if (!report.cells.empty()) report.mean_accuracy = sum / static_cast<double>(report.cells.size());
  write_json(dir / "train_report.json", report.to_json());
  write_text(dir / "training_loss.csv", losses.str());
  write_text(dir / "holdout_predictions.csv", preds.str());
  if (report.cells.empty()) throw TrainingError("train: no cell could be trained");
  return report;
}

LoopScenario loop_scenario(const ScenarioConfig& in) {
  in.validate();
  const ScenarioConfig cfg = in.resolved();
  LoopScenario sc;
  sc.traffic = load_traffic(cfg);
  sc.throughput_caps = throughput_caps(cfg, sc.traffic);
  sc.rule = cfg.rule;
  sc.lstm = cfg.lstm;
  sc.training = cfg.training;
  sc.split = cfg.split;
  sc.loop = cfg.loop;
  return sc;
}

LoopResult cmd_run(const ScenarioConfig& in) {
  LoopResult r = run_control_loop(loop_scenario(in));
  const ScenarioConfig cfg = in.resolved();

  const fs::path dir = prepare_output(cfg);
  {
    std::ofstream out(dir / "events.jsonl", std::ios::binary);
    r.log.write_jsonl(out);
  }
  write_json(dir / "summary.json", r.metrics.to_json());

  std::ostringstream splits;
  splits << "hour,parent,child,r,round\n";
  for (const auto& s : r.splits) {
    splits << s.hour << ',' << s.parent.to_string() << ',' << s.child.to_string() << ',' << format_double(s.r) << ','
           << s.round << '\n';
  }
  write_text(dir / "splits.csv", splits.str());

  A1Deployment final_dep;
  final_dep.version = r.metrics.deployments;
  final_dep.policy = cfg.rule;
  final_dep.models = r.models;
  write_json(dir / "a1_deployment.json", final_dep.to_json(false));
  json e2 = json::array();
  for (const auto& ev : r.log.records()) {
    if (ev.tag == EventTag::E2Control) e2.push_back(ev.payload);
  }
  write_json(dir / "e2_requests.json", e2);

  const auto edges = default_bin_edges();
  auto write_hist = [&](const std::vector<KpiSeries>& series, int factor) {
    std::ostringstream out;
    export_histogram_csv(out, histogram_hours(series, edges), edges);
    write_text(dir / ("histogram_factor" + std::to_string(factor) + ".csv"), out.str());
  };
  write_hist(r.baseline_horizon, 1);
  if (r.metrics.max_split_factor_reached > 1) write_hist(r.realized_horizon, r.metrics.max_split_factor_reached);
  return r;
}

LogCheck cmd_validate(const fs::path& event_log) {
  std::ifstream in(event_log, std::ios::binary);
  if (!in) throw ValidationError("cannot open event log " + event_log.string());
  return validate_event_log(in);
}

}  // namespace cpm
