#include "sqpf/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sqpf/errors.hpp"

namespace sqpf {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += v[i];
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

std::string canonical_config_string(const TrainConfig& c) {
  std::map<std::string, std::string> kv;
  kv["alpha"] = fmt_double(c.alpha);
  kv["augment"] = c.augment ? "1" : "0";
  kv["encoder.feature_channels"] = std::to_string(c.encoder.feature_channels);
  kv["encoder.kind"] = encoder_kind_name(c.encoder.kind);
  kv["encoder.stride"] = std::to_string(c.encoder.stride);
  kv["encoder.weights_source"] = c.encoder.weights_source;
  kv["epochs"] = std::to_string(c.epochs);
  kv["episodes_per_epoch"] = std::to_string(c.episodes_per_epoch);
  kv["eval_episodes"] = std::to_string(c.eval_episodes);
  kv["fold_index"] = std::to_string(c.fold_index);
  kv["k_folds"] = std::to_string(c.k_folds);
  kv["k_shot"] = std::to_string(c.k_shot);
  kv["lambda_coarse"] = fmt_double(c.lambda_coarse);
  kv["lambda_final"] = fmt_double(c.lambda_final);
  kv["learning_rate"] = fmt_double(c.learning_rate);
  kv["lr_decay"] = fmt_double(c.lr_decay);
  kv["lr_step_epochs"] = std::to_string(c.lr_step_epochs);
  kv["momentum"] = fmt_double(c.momentum);
  kv["n_regions"] = std::to_string(c.n_regions);
  kv["n_way"] = std::to_string(c.n_way);
  kv["seed"] = std::to_string(c.seed);
  kv["setting"] = c.setting == Setting::kSetting2 ? "2" : "1";
  kv["t_b"] = fmt_double(c.t_b);
  kv["temperature"] = fmt_double(c.temperature);
  kv["test_classes"] = join(c.test_classes);
  kv["train_classes"] = join(c.train_classes);

  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

TrainConfig parse_config_string(const std::string& text) {
  TrainConfig c;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  while (std::getline(ss, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("config line without '=': " + line);
    const std::string key =
        (section.empty() ? "" : section + ".") + trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "alpha") c.alpha = std::stod(val);
    else if (key == "augment") c.augment = val == "1" || val == "true";
    else if (key == "encoder.feature_channels") c.encoder.feature_channels = std::stoi(val);
    else if (key == "encoder.kind") c.encoder.kind = encoder_kind_from_name(val);
    else if (key == "encoder.stride") c.encoder.stride = std::stoi(val);
    else if (key == "encoder.weights_source") c.encoder.weights_source = val;
    else if (key == "epochs") c.epochs = std::stoi(val);
    else if (key == "episodes_per_epoch") c.episodes_per_epoch = std::stoi(val);
    else if (key == "eval_episodes") c.eval_episodes = std::stoi(val);
    else if (key == "fold_index") c.fold_index = std::stoi(val);
    else if (key == "k_folds") c.k_folds = std::stoi(val);
    else if (key == "k_shot") c.k_shot = std::stoi(val);
    else if (key == "lambda_coarse") c.lambda_coarse = std::stod(val);
    else if (key == "lambda_final") c.lambda_final = std::stod(val);
    else if (key == "learning_rate") c.learning_rate = std::stod(val);
    else if (key == "lr_decay") c.lr_decay = std::stod(val);
    else if (key == "lr_step_epochs") c.lr_step_epochs = std::stoi(val);
    else if (key == "momentum") c.momentum = std::stod(val);
    else if (key == "n_regions") c.n_regions = std::stoi(val);
    else if (key == "n_way") c.n_way = std::stoi(val);
    else if (key == "seed") c.seed = std::stoull(val);
    else if (key == "setting") c.setting = val == "2" ? Setting::kSetting2 : Setting::kSetting1;
    else if (key == "t_b") c.t_b = std::stod(val);
    else if (key == "temperature") c.temperature = std::stod(val);
    else if (key == "test_classes") c.test_classes = split_csv(val);
    else if (key == "train_classes") c.train_classes = split_csv(val);
    else throw DataError("unknown config key '" + key + "'");
  }
  return c;
}

TrainConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_string(text);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const TrainConfig& config) {
  return fnv1a_hex(canonical_config_string(config));
}

void validate_config(const TrainConfig& c) {
  if (c.episodes_per_epoch < 0 || c.epochs < 0)
    throw DataError("config: episode counts must be >= 0");
  if (c.learning_rate <= 0) throw DataError("config: learning_rate must be > 0");
  if (c.momentum < 0 || c.momentum >= 1) throw DataError("config: momentum must lie in [0,1)");
  if (c.n_regions < 1) throw DataError("config: n_regions must be >= 1");
  if (c.alpha < 0 || c.alpha > 1) throw DataError("config: alpha must lie in [0,1]");
  if (c.temperature <= 0) throw DataError("config: temperature must be > 0");
  if (c.t_b < 0 || c.t_b > 1) throw DataError("config: t_b must lie in [0,1]");
  if (c.n_way < 1 || c.k_shot < 1) throw DataError("config: n_way and k_shot must be >= 1");
  if (c.lambda_coarse < 0 || c.lambda_final < 0)
    throw DataError("config: loss weights must be >= 0");
  if (c.eval_episodes < 0) throw DataError("config: eval_episodes must be >= 0");
}

}  // namespace sqpf
