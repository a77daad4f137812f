#pragma once

// Trained model = predicate pipeline + network + training metadata, stored
// as a versioned JSON document. Every real number is written as the
// shortest decimal string that reads back to the same double.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrn/network.hpp"
#include "nrn/preprocess.hpp"

namespace nrn {

inline constexpr int kModelFormatVersion = 1;

struct ModelMetadata {
  std::string label;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t best_epoch = 0;
  /// NaN when the validation split had a single class.
  double best_val_auc = 0.0;

  friend bool operator==(const ModelMetadata& a, const ModelMetadata& b) {
    const bool auc_eq = a.best_val_auc == b.best_val_auc ||
                        (std::isnan(a.best_val_auc) && std::isnan(b.best_val_auc));
    return a.label == b.label && a.seed == b.seed && a.config_hash == b.config_hash &&
           a.best_epoch == b.best_epoch && auc_eq;
  }
};

struct Model {
  PredicatePipeline pipeline;
  Network network;
  ModelMetadata metadata;

  const std::vector<std::string>& schema() const { return pipeline.feature_names; }

  std::vector<TruthValue> predict_raw(const Matrix& raw) const {
    if (raw.rows == 0) return {};
    return predict(network, pipeline.transform(raw));
  }
};

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

inline json real(double v) { return format_exact(v); }

inline json reals(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(format_exact(x));
  return a;
}

inline json condition_json(const ThresholdCondition& c) {
  return {{"feature_index", c.feature_index},
          {"feature", c.feature},
          {"op", std::string(to_string(c.op))},
          {"threshold", real(c.threshold)}};
}

/// Navigates a document with error messages that carry the JSON pointer of
/// the offending location.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  Reader at(const std::string& key) const {
    if (!j_.is_object() || !j_.contains(key)) fail("missing key", path_ + "/" + key);
    return {j_.at(key), path_ + "/" + key};
  }
  Reader at(std::size_t i) const {
    if (!j_.is_array() || i >= j_.size()) fail("missing element", path_ + "/" + std::to_string(i));
    return {j_.at(i), path_ + "/" + std::to_string(i)};
  }
  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array", path_);
    return j_.size();
  }
  bool is_null() const { return j_.is_null(); }
  bool contains(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  std::string str() const {
    if (!j_.is_string()) fail("expected a string", path_);
    return j_.get<std::string>();
  }
  double real() const {
    try {
      return parse_exact(str());
    } catch (const std::invalid_argument&) {
      fail("malformed number", path_);
    }
  }
  std::uint64_t uint() const {
    if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<std::int64_t>() >= 0))
      fail("expected a non-negative integer", path_);
    return j_.get<std::uint64_t>();
  }
  bool boolean() const {
    if (!j_.is_boolean()) fail("expected a boolean", path_);
    return j_.get<bool>();
  }

  [[noreturn]] static void fail(const std::string& what, const std::string& where) {
    throw ModelFormatError("corrupt model document: " + what + " at " + (where.empty() ? "/" : where));
  }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
};

template <class F>
auto guarded(const Reader& r, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ModelFormatError&) {
    throw;
  } catch (const std::exception& e) {
    Reader::fail(e.what(), r.path());
  }
}

}  // namespace detail

inline nlohmann::json to_json(const Model& m) {
  using detail::json;
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["schema"] = {{"features", m.pipeline.feature_names}, {"label", m.metadata.label}};

  json plan;
  plan["degenerate"] = m.pipeline.plan.degenerate;
  plan["thresholds"] = json::array();
  for (const auto& t : m.pipeline.plan.thresholds) plan["thresholds"].push_back(detail::reals(t));
  doc["plan"] = plan;

  doc["scalers"] = json::array();
  for (const auto& s : m.pipeline.scalers)
    doc["scalers"].push_back({{"min", detail::real(s.min)}, {"max", detail::real(s.max)}});

  doc["predicates"] = json::array();
  for (const auto& p : m.network.predicates) {
    json jp{{"feature_index", p.feature_index}, {"name", p.name}};
    jp["condition"] = p.condition ? detail::condition_json(*p.condition) : json(nullptr);
    doc["predicates"].push_back(jp);
  }

  json net;
  net["normal_form"] = std::string(to_string(m.network.normal_form));
  net["channels"] = m.network.channels;
  net["blocks"] = json::array();
  for (const auto& b : m.network.blocks) {
    json jb;
    jb["kind"] = std::string(to_string(b.kind));
    jb["shape"] = {b.shape.channels, b.shape.out_size, b.shape.in_size};
    jb["connectivity"] = b.connectivity;
    jb["weights"] = detail::reals(b.weights.data());
    jb["betas"] = detail::reals(b.betas);
    net["blocks"].push_back(jb);
  }
  doc["network"] = net;

  doc["metadata"] = {{"seed", m.metadata.seed},
                     {"config_hash", m.metadata.config_hash},
                     {"best_epoch", m.metadata.best_epoch},
                     {"best_val_auc", detail::real(m.metadata.best_val_auc)}};
  return doc;
}

inline Model model_from_json(const nlohmann::json& doc) {
  using detail::Reader;
  const Reader root(doc, "");
  {
    const auto v = root.at("format_version");
    const auto version = v.uint();
    if (version != static_cast<std::uint64_t>(kModelFormatVersion))
      throw ModelFormatError("unsupported model format_version " + std::to_string(version) +
                             " (this build reads version " + std::to_string(kModelFormatVersion) + ")");
  }
  Model m;
  std::vector<std::string> names;
  const auto features = root.at("schema").at("features");
  for (std::size_t i = 0; i < features.size(); ++i) names.push_back(features.at(i).str());
  m.metadata.label = root.at("schema").at("label").str();

  BinarizationPlan plan;
  plan.degenerate = root.at("plan").at("degenerate").boolean();
  const auto th = root.at("plan").at("thresholds");
  for (std::size_t f = 0; f < th.size(); ++f) {
    std::vector<double> t;
    for (std::size_t k = 0; k < th.at(f).size(); ++k) t.push_back(th.at(f).at(k).real());
    plan.thresholds.push_back(std::move(t));
  }
  std::vector<MinMaxScaler> scalers;
  const auto sc = root.at("scalers");
  for (std::size_t f = 0; f < sc.size(); ++f)
    scalers.push_back({sc.at(f).at("min").real(), sc.at(f).at("max").real()});

  m.pipeline = detail::guarded(root, [&] {
    return PredicatePipeline::build(names, std::move(plan), std::move(scalers));
  });

  const auto preds = root.at("predicates");
  if (preds.size() != m.pipeline.predicates.size())
    Reader::fail("predicate list does not match the binarization plan", preds.path());
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const auto p = preds.at(k);
    if (p.at("name").str() != m.pipeline.predicates[k].name ||
        p.at("feature_index").uint() != m.pipeline.predicates[k].feature_index)
      Reader::fail("predicate does not match the binarization plan", p.path());
  }

  const auto jn = root.at("network");
  Network& net = m.network;
  net.feature_names = m.pipeline.feature_names;
  net.predicates = m.pipeline.predicates;
  net.normal_form = detail::guarded(jn, [&] { return parse_normal_form(jn.at("normal_form").str()); });
  net.channels = jn.at("channels").uint();
  const auto blocks = jn.at("blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto jb = blocks.at(i);
    LogicBlock b;
    b.kind = detail::guarded(jb, [&] { return parse_logic_kind(jb.at("kind").str()); });
    const auto shape = jb.at("shape");
    b.shape = {shape.at(0).uint(), shape.at(1).uint(), shape.at(2).uint()};
    b.weights = Tensor3(b.shape.channels, b.shape.out_size, b.shape.in_size);
    const auto w = jb.at("weights");
    if (w.size() != b.shape.weight_count()) Reader::fail("weight count does not match shape", w.path());
    for (std::size_t k = 0; k < w.size(); ++k) b.weights.data()[k] = w.at(k).real();
    const auto betas = jb.at("betas");
    for (std::size_t k = 0; k < betas.size(); ++k) b.betas.push_back(betas.at(k).real());
    const auto conn = jb.at("connectivity");
    for (std::size_t k = 0; k < conn.size(); ++k) b.connectivity.push_back(conn.at(k).uint());
    net.blocks.push_back(std::move(b));
  }
  detail::guarded(jn, [&] {
    net.validate();
    return 0;
  });

  const auto meta = root.at("metadata");
  m.metadata.seed = meta.at("seed").uint();
  m.metadata.config_hash = meta.at("config_hash").str();
  m.metadata.best_epoch = meta.at("best_epoch").uint();
  m.metadata.best_val_auc = meta.at("best_val_auc").real();
  return m;
}

inline std::string model_to_string(const Model& m) { return to_json(m).dump(2) + "\n"; }

inline Model model_from_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelFormatError("corrupt model document: " + std::string(e.what()));
  }
  return model_from_json(doc);
}

inline void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << model_to_string(m);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_string(ss.str());
}

}  // namespace nrn
