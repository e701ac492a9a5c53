#include "pertl/serialization.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pertl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw std::invalid_argument("checkpoint: matrix data length mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
  return m;
}

ordered_json interval_json(const Interval& i) { return ordered_json::array({i.lo, i.hi}); }

Interval interval_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

ordered_json config_json(const TrainConfig& c) {
  return {{"heads", c.heads},
          {"iterations", c.iterations},
          {"lr0", c.lr0},
          {"decay_factor", c.decay_factor},
          {"decay_every", c.decay_every},
          {"collocation_n", c.collocation_n},
          {"t_lo", c.t_lo},
          {"t_hi", c.t_hi},
          {"seed", c.seed},
          {"hidden_widths", c.hidden_widths},
          {"h", c.h},
          {"adam", {c.beta1, c.beta2, c.adam_eps}},
          {"ranges",
           {{"gamma", interval_json(c.ranges.gamma)},
            {"omega", interval_json(c.ranges.omega)},
            {"alpha", interval_json(c.ranges.alpha)},
            {"delta", interval_json(c.ranges.delta)},
            {"x0", interval_json(c.ranges.x0)}}}};
}

TrainConfig config_from(const json& j) {
  TrainConfig c;
  c.heads = j.at("heads").get<int>();
  c.iterations = j.at("iterations").get<int>();
  c.lr0 = j.at("lr0").get<double>();
  c.decay_factor = j.at("decay_factor").get<double>();
  c.decay_every = j.at("decay_every").get<int>();
  c.collocation_n = j.at("collocation_n").get<int>();
  c.t_lo = j.at("t_lo").get<double>();
  c.t_hi = j.at("t_hi").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.hidden_widths = j.at("hidden_widths").get<std::vector<int>>();
  c.h = j.at("h").get<int>();
  const auto& adam = j.at("adam");
  c.beta1 = adam.at(0).get<double>();
  c.beta2 = adam.at(1).get<double>();
  c.adam_eps = adam.at(2).get<double>();
  const auto& r = j.at("ranges");
  c.ranges.gamma = interval_from(r.at("gamma"));
  c.ranges.omega = interval_from(r.at("omega"));
  c.ranges.alpha = interval_from(r.at("alpha"));
  c.ranges.delta = interval_from(r.at("delta"));
  c.ranges.x0 = interval_from(r.at("x0"));
  return c;
}

ordered_json duffing_json(const DuffingParams& p) {
  return {{"delta", p.delta}, {"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma},
          {"omega", p.omega}, {"x0", p.x0},       {"v0", p.v0}};
}

DuffingParams duffing_from(const json& j) {
  DuffingParams p;
  p.delta = j.at("delta").get<double>();
  p.alpha = j.at("alpha").get<double>();
  p.beta = j.at("beta").get<double>();
  p.gamma = j.at("gamma").get<double>();
  p.omega = j.at("omega").get<double>();
  p.x0 = j.at("x0").get<double>();
  p.v0 = j.at("v0").get<double>();
  return p;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::string checkpoint_to_text(const Checkpoint& ckpt) {
  ordered_json j;
  j["format"] = kCheckpointFormat;
  j["seed"] = ckpt.config.seed;
  j["trunk_spec"] = {{"hidden_widths", ckpt.trunk.spec.hidden_widths},
                     {"m", ckpt.trunk.spec.m},
                     {"h", ckpt.trunk.spec.h},
                     {"activation", "tanh"},
                     {"reshape", "row-major"}};
  auto layers = ordered_json::array();
  for (std::size_t l = 0; l < ckpt.trunk.weights.size(); ++l) {
    const auto& b = ckpt.trunk.biases[l];
    layers.push_back({{"weight", matrix_to_json(ckpt.trunk.weights[l])},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  j["layers"] = layers;
  auto heads = ordered_json::array();
  for (const auto& w : ckpt.heads) heads.push_back(std::vector<double>(w.data(), w.data() + w.size()));
  j["heads"] = heads;
  auto sets = ordered_json::array();
  for (const auto& p : ckpt.parameter_sets) sets.push_back(duffing_json(p));
  j["parameter_sets"] = sets;
  j["train_config"] = config_json(ckpt.config);
  j["final_total_loss"] = ckpt.final_total_loss;
  j["final_head_losses"] = ckpt.final_head_losses;
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_text(const std::string& text) {
  const json j = json::parse(text);
  if (!j.contains("format") || j["format"].get<std::string>() != kCheckpointFormat) {
    throw std::invalid_argument(std::string("checkpoint: expected format ") + kCheckpointFormat);
  }
  Checkpoint ckpt;
  ckpt.config = config_from(j.at("train_config"));
  TrunkSpec spec;
  spec.hidden_widths = j.at("trunk_spec").at("hidden_widths").get<std::vector<int>>();
  spec.m = j.at("trunk_spec").at("m").get<int>();
  spec.h = j.at("trunk_spec").at("h").get<int>();
  ckpt.trunk = TrunkParams::zeros(spec);
  const auto& layers = j.at("layers");
  if (layers.size() != spec.hidden_widths.size()) {
    throw std::invalid_argument("checkpoint: layer count does not match trunk_spec");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd W = matrix_from_json(layers[l].at("weight"));
    const auto b = layers[l].at("bias").get<std::vector<double>>();
    if (W.rows() != ckpt.trunk.weights[l].rows() || W.cols() != ckpt.trunk.weights[l].cols() ||
        static_cast<Eigen::Index>(b.size()) != ckpt.trunk.biases[l].size()) {
      throw std::invalid_argument("checkpoint: layer " + std::to_string(l) + " has wrong shape");
    }
    ckpt.trunk.weights[l] = std::move(W);
    ckpt.trunk.biases[l] = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
  }
  for (const auto& hj : j.at("heads")) {
    const auto w = hj.get<std::vector<double>>();
    if (static_cast<int>(w.size()) != spec.h) throw std::invalid_argument("checkpoint: head size != h");
    ckpt.heads.emplace_back(Eigen::Map<const Eigen::VectorXd>(w.data(), w.size()));
  }
  for (const auto& pj : j.at("parameter_sets")) ckpt.parameter_sets.push_back(duffing_from(pj));
  ckpt.final_total_loss = j.value("final_total_loss", 0.0);
  ckpt.final_head_losses = j.value("final_head_losses", std::vector<double>{});
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, checkpoint_to_text(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_text(read_file(path));
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key " + key);
    }
    kv[key] = value;
  }
  return kv;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    const std::string s = trim(value);
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + value + "'");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  const std::string s = trim(value);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("config: " + key + " expects an integer, got '" + value + "'");
  }
  return v;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& part : split(value, ',')) out.push_back(parse_double(key, part));
  return out;
}

Interval parse_interval(const std::string& key, const std::string& value) {
  const auto v = parse_double_list(key, value);
  if (v.size() != 2 || !(v[0] < v[1])) {
    throw std::invalid_argument("config: " + key + " expects 'lo, hi' with lo < hi");
  }
  return {v[0], v[1]};
}

std::vector<std::string> apply_train_keys(const std::map<std::string, std::string>& kv,
                                          TrainConfig& c) {
  std::vector<std::string> unknown;
  for (const auto& [key, value] : kv) {
    if (key == "heads") c.heads = static_cast<int>(parse_int(key, value));
    else if (key == "iterations") c.iterations = static_cast<int>(parse_int(key, value));
    else if (key == "lr0") c.lr0 = parse_double(key, value);
    else if (key == "decay_factor") c.decay_factor = parse_double(key, value);
    else if (key == "decay_every") c.decay_every = static_cast<int>(parse_int(key, value));
    else if (key == "collocation_n") c.collocation_n = static_cast<int>(parse_int(key, value));
    else if (key == "t_lo") c.t_lo = parse_double(key, value);
    else if (key == "t_hi") c.t_hi = parse_double(key, value);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "h") c.h = static_cast<int>(parse_int(key, value));
    else if (key == "hidden_widths") {
      c.hidden_widths.clear();
      for (const auto& part : split(value, ',')) c.hidden_widths.push_back(static_cast<int>(parse_int(key, part)));
    } else if (key == "adam_beta1") c.beta1 = parse_double(key, value);
    else if (key == "adam_beta2") c.beta2 = parse_double(key, value);
    else if (key == "adam_eps") c.adam_eps = parse_double(key, value);
    else if (key == "range.gamma") c.ranges.gamma = parse_interval(key, value);
    else if (key == "range.omega") c.ranges.omega = parse_interval(key, value);
    else if (key == "range.alpha") c.ranges.alpha = parse_interval(key, value);
    else if (key == "range.delta") c.ranges.delta = parse_interval(key, value);
    else if (key == "range.x0") c.ranges.x0 = parse_interval(key, value);
    else unknown.push_back(key);
  }
  return unknown;
}

std::string train_config_to_text(const TrainConfig& c) {
  std::ostringstream os;
  auto interval = [](const Interval& i) { return format_double(i.lo) + ", " + format_double(i.hi); };
  os << "heads = " << c.heads << "\n"
     << "iterations = " << c.iterations << "\n"
     << "lr0 = " << format_double(c.lr0) << "\n"
     << "decay_factor = " << format_double(c.decay_factor) << "\n"
     << "decay_every = " << c.decay_every << "\n"
     << "collocation_n = " << c.collocation_n << "\n"
     << "t_lo = " << format_double(c.t_lo) << "\n"
     << "t_hi = " << format_double(c.t_hi) << "\n"
     << "seed = " << c.seed << "\n"
     << "hidden_widths = ";
  for (std::size_t i = 0; i < c.hidden_widths.size(); ++i) {
    os << (i ? ", " : "") << c.hidden_widths[i];
  }
  os << "\n"
     << "h = " << c.h << "\n"
     << "adam_beta1 = " << format_double(c.beta1) << "\n"
     << "adam_beta2 = " << format_double(c.beta2) << "\n"
     << "adam_eps = " << format_double(c.adam_eps) << "\n"
     << "range.gamma = " << interval(c.ranges.gamma) << "\n"
     << "range.omega = " << interval(c.ranges.omega) << "\n"
     << "range.alpha = " << interval(c.ranges.alpha) << "\n"
     << "range.delta = " << interval(c.ranges.delta) << "\n"
     << "range.x0 = " << interval(c.ranges.x0) << "\n";
  return os.str();
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) { return content_hash(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::invalid_argument("csv: missing column '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(trim(line.substr(1)));
      continue;
    }
    auto fields = split(line, ',');
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw std::invalid_argument("csv line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw std::invalid_argument("csv: missing header row");
  return table;
}

std::string csv_to_text(const CsvTable& table) {
  std::ostringstream os;
  for (const auto& c : table.comments) os << "# " << c << "\n";
  auto row = [&os](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
  };
  row(table.header);
  for (const auto& r : table.rows) row(r);
  return os.str();
}

}  // namespace pertl
