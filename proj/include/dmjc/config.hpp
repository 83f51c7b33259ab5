#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dmjc/assignment.hpp"
#include "dmjc/dmjc_t.hpp"
#include "dmjc/error.hpp"
#include "dmjc/io.hpp"
#include "dmjc/kmeans.hpp"
#include "dmjc/optimizer.hpp"

namespace dmjc {

enum class Method { dec, dmjc_s, dmjc_t, s_view, s_all_views };
enum class Normalization { unit_interval, standardize, none };

inline std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::dec: return "dec";
    case Method::dmjc_s: return "dmjc_s";
    case Method::dmjc_t: return "dmjc_t";
    case Method::s_view: return "s_view";
    case Method::s_all_views: return "s_all_views";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  for (auto m : {Method::dec, Method::dmjc_s, Method::dmjc_t, Method::s_view, Method::s_all_views})
    if (s == to_string(m)) return m;
  fail(Errc::config, "unknown method '" + std::string(s) +
                         "' (expected dec, dmjc_s, dmjc_t, s_view or s_all_views)");
}

inline std::string_view to_string(Normalization n) noexcept {
  switch (n) {
    case Normalization::unit_interval: return "unit_interval";
    case Normalization::standardize: return "standardize";
    case Normalization::none: return "none";
  }
  return "?";
}

inline Normalization normalization_from_string(std::string_view s) {
  for (auto n : {Normalization::unit_interval, Normalization::standardize, Normalization::none})
    if (s == to_string(n)) return n;
  fail(Errc::config, "unknown normalization '" + std::string(s) + "'");
}

struct ViewConfig {
  std::string feature_file;
  std::vector<std::size_t> encoder_dims;  // hidden... -> embedding; input dim comes from the file
  Normalization normalization = Normalization::unit_interval;

  bool operator==(const ViewConfig&) const = default;
};

struct PretrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  double lr = 1e-3;

  bool operator==(const PretrainConfig&) const = default;
};

struct JointConfig {
  OptimizerKind optimizer = OptimizerKind::adagrad;
  double lr = 1e-2;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 100;

  bool operator==(const JointConfig&) const = default;
};

/// One experiment. Relative paths resolve against base_dir (the config
/// file's directory when loaded from disk).
struct RunConfig {
  Method method = Method::dmjc_t;
  std::size_t clusters = 0;
  std::vector<ViewConfig> views;
  std::size_t view_index = 0;  // the view used by dec and s_view
  DecHyper hyper;              // hyper.max_epochs mirrors joint.max_epochs
  double lambda = 2.0e4;
  PretrainConfig pretrain;
  JointConfig joint;
  ApgConfig apg;
  KmeansOptions kmeans;
  std::uint64_t seed = 0;
  std::optional<std::string> labels_file;
  std::string output_dir = "out";
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }

  bool single_view_method() const noexcept {
    return method == Method::dec || method == Method::s_view;
  }

  // Pass require_files = false when views are supplied in memory.
  void validate(bool require_files = true) const {
    require(clusters >= 1, Errc::config, "config: clusters must be >= 1");
    require(!views.empty(), Errc::config, "config: at least one view is required");
    for (std::size_t v = 0; v < views.size(); ++v) {
      require(!require_files || !views[v].feature_file.empty(), Errc::config,
              "config: view " + std::to_string(v + 1) + " has no feature_file");
      require(!views[v].encoder_dims.empty(), Errc::config,
              "config: view " + std::to_string(v + 1) + " has no encoder_dims");
      for (auto d : views[v].encoder_dims)
        require(d >= 1, Errc::config, "config: encoder_dims entries must be >= 1");
    }
    require(view_index < views.size(), Errc::config, "config: view_index out of range");
    require(hyper.alpha > 0.0, Errc::config, "config: alpha must be > 0");
    require(hyper.gamma > 1.0, Errc::config, "config: gamma must be > 1");
    require(hyper.update_interval >= 1, Errc::config, "config: update_interval must be >= 1");
    require(hyper.label_change_tol >= 0.0 && hyper.label_change_tol <= 1.0, Errc::config,
            "config: label_change_tol must lie in [0,1]");
    require(lambda >= 0.0, Errc::config, "config: lambda must be >= 0");
    require(pretrain.epochs >= 1 && pretrain.batch_size >= 1 && pretrain.lr > 0.0, Errc::config,
            "config: pretrain epochs, batch_size and lr must be positive");
    require(joint.batch_size >= 1 && joint.lr > 0.0, Errc::config,
            "config: joint batch_size and lr must be positive");
    require(apg.max_iter >= 1 && apg.step_init > 0.0 && apg.rel_tol > 0.0 &&
                apg.backtrack_factor > 0.0 && apg.backtrack_factor < 1.0,
            Errc::config, "config: invalid apg settings");
    require(kmeans.n_init >= 1 && kmeans.max_iter >= 1, Errc::config,
            "config: kmeans n_init and max_iter must be >= 1");
  }

  bool operator==(const RunConfig& o) const {
    return method == o.method && clusters == o.clusters && views == o.views &&
           view_index == o.view_index && hyper == o.hyper && lambda == o.lambda &&
           pretrain == o.pretrain && joint == o.joint && apg == o.apg &&
           kmeans.max_iter == o.kmeans.max_iter && kmeans.tol == o.kmeans.tol &&
           kmeans.n_init == o.kmeans.n_init && seed == o.seed && labels_file == o.labels_file &&
           output_dir == o.output_dir;
  }
};

namespace detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Rejects keys outside `allowed`; typos in a config otherwise go unnoticed.
inline void check_keys(const json& obj, std::string_view where, std::set<std::string> allowed) {
  require(obj.is_object(), Errc::config, "config: '" + std::string(where) + "' must be an object");
  for (const auto& [key, _] : obj.items())
    require(allowed.count(key) > 0, Errc::config,
            "config: unknown key '" + key + "' in " + std::string(where));
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out, std::string_view where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(Errc::config, "config: bad value for " + std::string(where) + "." + key + ": " + e.what());
  }
}

inline std::size_t read_count(const json& obj, const char* key, std::size_t fallback,
                              std::string_view where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  require(v.is_number_integer() && v.get<std::int64_t>() >= 0, Errc::config,
          "config: " + std::string(where) + "." + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::read_count;
  using detail::read_opt;
  check_keys(j, "top level",
             {"method", "clusters", "views", "view_index", "hyper", "lambda", "pretrain", "joint",
              "apg", "kmeans", "seed", "labels_file", "output_dir"});
  RunConfig c;
  std::string method = std::string(to_string(c.method));
  read_opt(j, "method", method, "top");
  c.method = method_from_string(method);
  require(j.contains("clusters"), Errc::config, "config: 'clusters' is required");
  c.clusters = read_count(j, "clusters", 0, "top");
  require(j.contains("views") && j.at("views").is_array(), Errc::config,
          "config: 'views' must be an array");
  for (const auto& vj : j.at("views")) {
    check_keys(vj, "views[]", {"feature_file", "encoder_dims", "normalization"});
    ViewConfig vc;
    read_opt(vj, "feature_file", vc.feature_file, "views[]");
    read_opt(vj, "encoder_dims", vc.encoder_dims, "views[]");
    std::string norm = std::string(to_string(vc.normalization));
    read_opt(vj, "normalization", norm, "views[]");
    vc.normalization = normalization_from_string(norm);
    c.views.push_back(std::move(vc));
  }
  c.view_index = read_count(j, "view_index", 0, "top");
  if (j.contains("hyper")) {
    const auto& h = j.at("hyper");
    check_keys(h, "hyper", {"alpha", "gamma", "update_interval", "label_change_tol"});
    read_opt(h, "alpha", c.hyper.alpha, "hyper");
    read_opt(h, "gamma", c.hyper.gamma, "hyper");
    c.hyper.update_interval = read_count(h, "update_interval", c.hyper.update_interval, "hyper");
    read_opt(h, "label_change_tol", c.hyper.label_change_tol, "hyper");
  }
  read_opt(j, "lambda", c.lambda, "top");
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    check_keys(p, "pretrain", {"epochs", "batch_size", "lr"});
    c.pretrain.epochs = read_count(p, "epochs", c.pretrain.epochs, "pretrain");
    c.pretrain.batch_size = read_count(p, "batch_size", c.pretrain.batch_size, "pretrain");
    read_opt(p, "lr", c.pretrain.lr, "pretrain");
  }
  if (j.contains("joint")) {
    const auto& p = j.at("joint");
    check_keys(p, "joint", {"optimizer", "lr", "batch_size", "max_epochs"});
    std::string kind = std::string(to_string(c.joint.optimizer));
    read_opt(p, "optimizer", kind, "joint");
    try {
      c.joint.optimizer = optimizer_kind_from_string(kind);
    } catch (const Error& e) {
      fail(Errc::config, std::string("config: joint.optimizer: ") + e.what());
    }
    read_opt(p, "lr", c.joint.lr, "joint");
    c.joint.batch_size = read_count(p, "batch_size", c.joint.batch_size, "joint");
    c.joint.max_epochs = read_count(p, "max_epochs", c.joint.max_epochs, "joint");
  }
  c.hyper.max_epochs = c.joint.max_epochs;
  if (j.contains("apg")) {
    const auto& p = j.at("apg");
    check_keys(p, "apg", {"max_iter", "step_init", "backtrack_factor", "rel_tol"});
    c.apg.max_iter = read_count(p, "max_iter", c.apg.max_iter, "apg");
    read_opt(p, "step_init", c.apg.step_init, "apg");
    read_opt(p, "backtrack_factor", c.apg.backtrack_factor, "apg");
    read_opt(p, "rel_tol", c.apg.rel_tol, "apg");
  }
  if (j.contains("kmeans")) {
    const auto& p = j.at("kmeans");
    check_keys(p, "kmeans", {"max_iter", "tol", "n_init"});
    c.kmeans.max_iter = read_count(p, "max_iter", c.kmeans.max_iter, "kmeans");
    read_opt(p, "tol", c.kmeans.tol, "kmeans");
    c.kmeans.n_init = read_count(p, "n_init", c.kmeans.n_init, "kmeans");
  }
  if (j.contains("seed")) {
    require(j.at("seed").is_number_unsigned() || j.at("seed").is_number_integer(), Errc::config,
            "config: seed must be an integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("labels_file") && !j.at("labels_file").is_null()) {
    std::string lf;
    read_opt(j, "labels_file", lf, "top");
    c.labels_file = lf;
  }
  read_opt(j, "output_dir", c.output_dir, "top");
  c.validate();
  return c;
}

/// Full serialization, including defaulted fields, in a fixed key order.
inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
  detail::ordered_json j;
  j["method"] = std::string(to_string(c.method));
  j["clusters"] = c.clusters;
  j["views"] = detail::ordered_json::array();
  for (const auto& v : c.views) {
    detail::ordered_json vj;
    vj["feature_file"] = v.feature_file;
    vj["encoder_dims"] = v.encoder_dims;
    vj["normalization"] = std::string(to_string(v.normalization));
    j["views"].push_back(vj);
  }
  j["view_index"] = c.view_index;
  j["hyper"] = {{"alpha", c.hyper.alpha},
                {"gamma", c.hyper.gamma},
                {"update_interval", c.hyper.update_interval},
                {"label_change_tol", c.hyper.label_change_tol}};
  j["lambda"] = c.lambda;
  j["pretrain"] = {
      {"epochs", c.pretrain.epochs}, {"batch_size", c.pretrain.batch_size}, {"lr", c.pretrain.lr}};
  j["joint"] = {{"optimizer", std::string(to_string(c.joint.optimizer))},
                {"lr", c.joint.lr},
                {"batch_size", c.joint.batch_size},
                {"max_epochs", c.joint.max_epochs}};
  j["apg"] = {{"max_iter", c.apg.max_iter},
              {"step_init", c.apg.step_init},
              {"backtrack_factor", c.apg.backtrack_factor},
              {"rel_tol", c.apg.rel_tol}};
  j["kmeans"] = {
      {"max_iter", c.kmeans.max_iter}, {"tol", c.kmeans.tol}, {"n_init", c.kmeans.n_init}};
  j["seed"] = c.seed;
  if (c.labels_file) j["labels_file"] = *c.labels_file;
  j["output_dir"] = c.output_dir;
  return j;
}

inline RunConfig parse_config_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::config, std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const Error& e) {
    fail(Errc::config, e.what());
  }
  auto c = parse_config_text(text);
  c.base_dir = path.parent_path();
  return c;
}

}  // namespace dmjc
