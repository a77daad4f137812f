#pragma once

// Run configuration: flat "key = value" text using the hyper-parameter
// names of the R-NRN search space. The same keys are accepted as CLI flags.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrn/network.hpp"
#include "nrn/preprocess.hpp"
#include "nrn/trainer.hpp"

namespace nrn {

struct RunConfig {
  std::string data;
  std::string label = "label";
  std::string out = ".";
  std::uint64_t seed = 0;
  ArchitectureConfig arch;
  TrainConfig train;
  FbftParams fbft;
  BinarizeMode binarize = BinarizeMode::Replace;

  // layer_sizes may be a scalar (one size for every layer) or a list; it is
  // resolved against n_layers in finalize().
  std::vector<std::size_t> layer_sizes_given;
  bool n_layers_given = false;

  /// Resolves layer_sizes/n_layers and copies shared fields. Call once
  /// after all settings are applied.
  void finalize() {
    if (!layer_sizes_given.empty()) {
      if (layer_sizes_given.size() == 1) {
        arch.layer_sizes.assign(arch.n_layers, layer_sizes_given.front());
      } else {
        if (n_layers_given && layer_sizes_given.size() != arch.n_layers)
          throw std::invalid_argument("layer_sizes lists " + std::to_string(layer_sizes_given.size()) +
                                      " sizes but n_layers is " + std::to_string(arch.n_layers));
        arch.n_layers = layer_sizes_given.size();
        arch.layer_sizes = layer_sizes_given;
      }
    } else if (arch.layer_sizes.size() != arch.n_layers) {
      // Defaults describe two layers; other depths reuse the first size.
      arch.layer_sizes.assign(arch.n_layers, arch.layer_sizes.front());
    }
    train.add_negations = arch.add_negations;
    train.seed = seed;
    train.validate();
  }

  /// Canonical "key=value" lines of every effective setting except the
  /// output directory; the basis of config_hash().
  std::string canonical_text() const;
  std::string config_hash() const;
};

struct ConfigWarning {
  std::string key;
  std::string message;
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "True" || v == "1") return true;
  if (v == "false" || v == "False" || v == "0") return false;
  throw std::invalid_argument(key + ": expected true or false, got '" + v + "'");
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
  }
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  const long long d = parse_int(key, v);
  if (d < 0) throw std::invalid_argument(key + ": must be >= 0");
  return static_cast<std::size_t>(d);
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, std::string v) {
  for (char& c : v)
    if (c == '[' || c == ']') c = ' ';
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(' ');
    if (first == std::string::npos) continue;
    item = item.substr(first, item.find_last_not_of(' ') - first + 1);
    out.push_back(parse_count(key, item));
  }
  if (out.empty()) throw std::invalid_argument(key + ": expected one or more sizes");
  return out;
}

struct Range {
  double lo, hi;
};

}  // namespace detail

/// Search-space ranges; values outside only produce a warning.
inline const std::map<std::string, detail::Range>& table6_ranges() {
  static const std::map<std::string, detail::Range> r{
      {"layer_sizes", {2, 30}},
      {"n_layers", {1, 6}},
      {"n_selected_features_input", {2, 12}},
      {"n_selected_features_internal", {2, 10}},
      {"n_selected_features_output", {2, 10}},
      {"perform_prune_quantile", {0.05, 0.9}},
      {"perform_prune_pc", {1, 8}},
      {"ip_pc", {0, 20}},
      {"ip_plateau_count_pc", {10, 30}},
      {"ucb_scale", {1.0, 2.0}},
      {"delta", {1.0, 12.0}},
      {"weight_init", {0.01, 1.0}},
      {"learning_rate", {0.0001, 0.15}},
      {"early_stopping_plateau_count", {25, 50}},
      {"t_0", {2, 10}},
      {"t_mult", {1, 5}},
      {"l1_lambda", {0.00001, 0.1}},
      {"weight_decay_alpha", {0.00001, 0.1}},
      {"lookahead_steps", {4, 15}},
      {"lookahead_steps_size", {0.5, 0.8}},
      {"fbft_tree_num", {2, 20}},
      {"fbft_tree_depth", {2, 10}},
      {"fbft_feature_selection", {0.3, 1.0}},
      {"fbft_thresh_round", {2, 6}},
  };
  return r;
}

namespace detail {

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> s{
      {"data", [](RunConfig& c, const std::string&, const std::string& v) { c.data = v; }},
      {"label", [](RunConfig& c, const std::string&, const std::string& v) { c.label = v; }},
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(parse_int(k, v));
       }},
      {"binarize", [](RunConfig& c, const std::string&, const std::string& v) {
         c.binarize = parse_binarize_mode(v);
       }},
      {"layer_sizes", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.layer_sizes_given = parse_size_list(k, v);
       }},
      {"n_layers", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.arch.n_layers = parse_count(k, v);
         c.n_layers_given = true;
       }},
      {"n_selected_features_input", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.arch.n_selected_features_input = parse_count(k, v);
       }},
      {"n_selected_features_internal", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.arch.n_selected_features_internal = parse_count(k, v);
       }},
      {"n_selected_features_output", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.arch.n_selected_features_output = parse_count(k, v);
       }},
      {"normal_form", [](RunConfig& c, const std::string&, const std::string& v) {
         c.arch.normal_form = parse_normal_form(v);
       }},
      {"weight_init", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.arch.weight_init = parse_real(k, v);
       }},
      {"add_negations", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.arch.add_negations = parse_bool(k, v);
       }},
      {"perform_prune_quantile", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.prune_quantile = parse_real(k, v);
       }},
      {"perform_prune_pc", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.kappa = static_cast<double>(parse_count(k, v));
       }},
      {"ip_pc", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.iota = static_cast<double>(parse_count(k, v));
       }},
      {"ip_plateau_count_pc", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.tau = static_cast<double>(parse_count(k, v));
       }},
      {"ucb_scale", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.ucb_scale = parse_real(k, v);
       }},
      {"prune_strategy", [](RunConfig& c, const std::string&, const std::string& v) {
         c.train.prune_strategy = parse_prune_strategy(v);
       }},
      {"delta", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.delta = parse_real(k, v);
       }},
      {"bootstrap", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.fbft.bootstrap = parse_bool(k, v);
       }},
      {"learning_rate", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.learning_rate = parse_real(k, v);
       }},
      {"early_stopping_plateau_count", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.early_stopping_plateau_count = parse_count(k, v);
       }},
      {"t_0", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.t_0 = parse_real(k, v); }},
      {"t_mult", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.t_mult = parse_real(k, v);
       }},
      {"use_swa", [](RunConfig&, const std::string& k, const std::string& v) {
         if (parse_bool(k, v)) throw std::invalid_argument("unsupported option: use_swa");
       }},
      {"use_lookahead", [](RunConfig&, const std::string& k, const std::string& v) {
         if (parse_bool(k, v)) throw std::invalid_argument("unsupported option: use_lookahead");
       }},
      // Accepted so search-space files load unchanged; they only matter with
      // use_lookahead, which is rejected above.
      {"lookahead_steps", [](RunConfig&, const std::string& k, const std::string& v) { parse_count(k, v); }},
      {"lookahead_steps_size", [](RunConfig&, const std::string& k, const std::string& v) { parse_real(k, v); }},
      {"use_l1", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.use_l1 = parse_bool(k, v); }},
      {"l1_lambda", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.l1_lambda = parse_real(k, v);
       }},
      {"use_weight_decay", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.use_weight_decay = parse_bool(k, v);
       }},
      {"weight_decay_alpha", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.weight_decay_alpha = parse_real(k, v);
       }},
      {"fbft_tree_num", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.fbft.tree_num = parse_count(k, v);
       }},
      {"fbft_tree_depth", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.fbft.tree_depth = parse_count(k, v);
       }},
      {"fbft_feature_selection", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.fbft.feature_fraction = parse_real(k, v);
       }},
      {"fbft_thresh_round", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.fbft.thresh_round = static_cast<int>(parse_int(k, v));
       }},
      {"epochs", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.epochs = parse_count(k, v);
       }},
      {"batch_size", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.batch_size = parse_count(k, v);
       }},
  };
  return s;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const auto& [name, _] : detail::setters()) k.push_back(name);
  return k;
}

/// Applies one setting. Unknown keys and malformed values throw; values
/// outside the search-space range are applied and reported as warnings.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                          std::vector<ConfigWarning>* warnings = nullptr) {
  const auto& s = detail::setters();
  auto it = s.find(key);
  if (it == s.end()) throw std::invalid_argument("unknown configuration key '" + key + "'");
  it->second(cfg, key, value);
  auto r = table6_ranges().find(key);
  if (r == table6_ranges().end() || !warnings) return;
  std::vector<double> values;
  if (key == "layer_sizes") {
    for (auto v : detail::parse_size_list(key, value)) values.push_back(static_cast<double>(v));
  } else {
    values.push_back(detail::parse_real(key, value));
  }
  for (double v : values)
    if (v < r->second.lo || v > r->second.hi)
      warnings->push_back({key, key + "=" + format_sig(v, 6) + " is outside the search range [" +
                                    format_sig(r->second.lo, 6) + ", " + format_sig(r->second.hi, 6) + "]"});
}

/// Flat text: one "key = value" per line, '#' starts a comment.
inline void apply_config_text(RunConfig& cfg, std::istream& in, const std::string& source,
                              std::vector<ConfigWarning>* warnings = nullptr) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find_first_of("=:");
    if (eq == std::string::npos)
      throw std::invalid_argument(source + ":" + std::to_string(line_no) + ": expected key = value");
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r\"");
      if (a == std::string::npos) return std::string();
      return s.substr(a, s.find_last_not_of(" \t\r\"") - a + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    try {
      apply_setting(cfg, key, value, warnings);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path,
                              std::vector<ConfigWarning>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  apply_config_text(cfg, in, path, warnings);
}

inline std::string RunConfig::canonical_text() const {
  std::map<std::string, std::string> kv;
  auto num = [](double v) { return format_exact(v); };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  kv["data"] = data;
  kv["label"] = label;
  kv["seed"] = std::to_string(seed);
  kv["binarize"] = std::string(to_string(binarize));
  std::string sizes;
  for (std::size_t i = 0; i < arch.layer_sizes.size(); ++i)
    sizes += (i ? "," : "") + std::to_string(arch.layer_sizes[i]);
  kv["layer_sizes"] = sizes;
  kv["n_layers"] = std::to_string(arch.n_layers);
  kv["n_selected_features_input"] = std::to_string(arch.n_selected_features_input);
  kv["n_selected_features_internal"] = std::to_string(arch.n_selected_features_internal);
  kv["n_selected_features_output"] = std::to_string(arch.n_selected_features_output);
  kv["normal_form"] = std::string(to_string(arch.normal_form));
  kv["weight_init"] = num(arch.weight_init);
  kv["add_negations"] = flag(arch.add_negations);
  kv["perform_prune_quantile"] = num(train.prune_quantile);
  kv["perform_prune_pc"] = num(train.kappa);
  kv["ip_pc"] = num(train.iota);
  kv["ip_plateau_count_pc"] = num(train.tau);
  kv["ucb_scale"] = num(train.ucb_scale);
  kv["prune_strategy"] = std::string(to_string(train.prune_strategy));
  kv["delta"] = num(train.delta);
  kv["learning_rate"] = num(train.learning_rate);
  kv["early_stopping_plateau_count"] = std::to_string(train.early_stopping_plateau_count);
  kv["t_0"] = num(train.t_0);
  kv["t_mult"] = num(train.t_mult);
  kv["use_l1"] = flag(train.use_l1);
  kv["l1_lambda"] = num(train.l1_lambda);
  kv["use_weight_decay"] = flag(train.use_weight_decay);
  kv["weight_decay_alpha"] = num(train.weight_decay_alpha);
  kv["fbft_tree_num"] = std::to_string(fbft.tree_num);
  kv["fbft_tree_depth"] = std::to_string(fbft.tree_depth);
  kv["fbft_feature_selection"] = num(fbft.feature_fraction);
  kv["fbft_thresh_round"] = std::to_string(fbft.thresh_round);
  kv["bootstrap"] = flag(fbft.bootstrap);
  kv["epochs"] = std::to_string(train.epochs);
  kv["batch_size"] = std::to_string(train.batch_size);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

/// 64-bit FNV-1a of canonical_text(), as 16 hex digits.
inline std::string RunConfig::config_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_text()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nrn
