#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dmjc/assignment.hpp"
#include "dmjc/autoencoder.hpp"
#include "dmjc/config.hpp"
#include "dmjc/dec.hpp"
#include "dmjc/dmjc_s.hpp"
#include "dmjc/dmjc_t.hpp"
#include "dmjc/io.hpp"
#include "dmjc/kmeans.hpp"
#include "dmjc/metrics.hpp"

namespace dmjc {

/// Contents of metrics.json.
struct RunSummary {
  std::string method;
  std::size_t n_samples = 0;
  std::size_t n_views = 0;
  std::size_t clusters = 0;
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  bool converged = false;
  double final_loss = 0.0;                  // K-means inertia for s_view / s_all_views
  std::vector<double> weights;              // w_v, or sum_j pi_j^(v); empty for K-means baselines
  std::vector<double> pretrain_final_loss;  // per pretrained view
  std::optional<double> acc;
  std::optional<double> nmi;
  std::optional<double> ari;

  bool operator==(const RunSummary&) const = default;
};

struct RunReport {
  RunSummary summary;
  std::vector<EpochRecord> history;
  std::vector<Label> labels;
  std::size_t history_views = 0;  // width of the weight / per-view accuracy columns
  bool has_truth = false;
};

inline nlohmann::ordered_json summary_to_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["method"] = s.method;
  j["n_samples"] = s.n_samples;
  j["n_views"] = s.n_views;
  j["clusters"] = s.clusters;
  j["seed"] = s.seed;
  j["epochs_run"] = s.epochs_run;
  j["converged"] = s.converged;
  j["final_loss"] = s.final_loss;
  j["weights"] = s.weights;
  j["pretrain_final_loss"] = s.pretrain_final_loss;
  if (s.acc) j["acc"] = *s.acc;
  if (s.nmi) j["nmi"] = *s.nmi;
  if (s.ari) j["ari"] = *s.ari;
  return j;
}

inline RunSummary summary_from_json(const nlohmann::json& j) {
  RunSummary s;
  try {
    s.method = j.at("method").get<std::string>();
    s.n_samples = j.at("n_samples").get<std::size_t>();
    s.n_views = j.at("n_views").get<std::size_t>();
    s.clusters = j.at("clusters").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.epochs_run = j.at("epochs_run").get<std::size_t>();
    s.converged = j.at("converged").get<bool>();
    s.final_loss = j.at("final_loss").get<double>();
    s.weights = j.at("weights").get<std::vector<double>>();
    s.pretrain_final_loss = j.at("pretrain_final_loss").get<std::vector<double>>();
    if (j.contains("acc")) s.acc = j.at("acc").get<double>();
    if (j.contains("nmi")) s.nmi = j.at("nmi").get<double>();
    if (j.contains("ari")) s.ari = j.at("ari").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, std::string("metrics json: ") + e.what());
  }
  return s;
}

/// epoch,loss,w_1..w_V[,acc_view_1..acc_view_V,acc_fused]; epochs are 1-based.
inline std::string format_history_csv(const RunReport& r) {
  std::string out = "epoch,loss";
  const std::size_t v = r.history_views;
  for (std::size_t k = 1; k <= v; ++k) out += ",w_" + std::to_string(k);
  if (r.has_truth) {
    for (std::size_t k = 1; k <= v; ++k) out += ",acc_view_" + std::to_string(k);
    out += ",acc_fused";
  }
  out += "\n";
  for (const auto& e : r.history) {
    out += std::to_string(e.epoch + 1) + "," + detail::format_double(e.loss);
    for (std::size_t k = 0; k < v; ++k)
      out += "," + (k < e.view_weights.size() ? detail::format_double(e.view_weights[k]) : "");
    if (r.has_truth) {
      for (std::size_t k = 0; k < v; ++k)
        out += "," + (k < e.view_acc.size() ? detail::format_double(e.view_acc[k]) : "");
      out += "," + (e.fused_acc ? detail::format_double(*e.fused_acc) : "");
    }
    out += "\n";
  }
  return out;
}

inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kLabelsFile = "labels.csv";
inline constexpr const char* kHistoryFile = "history.csv";

/// Writes metrics.json, labels.csv and history.csv. All three are staged as
/// temporaries first and only renamed into place once every write succeeded.
inline void emit_report(const RunReport& report, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Errc::io, "cannot create output directory '" + dir.string() + "': " + ec.message());

  const std::vector<std::pair<fs::path, std::string>> files{
      {dir / kMetricsFile, summary_to_json(report.summary).dump(2) + "\n"},
      {dir / kLabelsFile, format_labels(report.labels)},
      {dir / kHistoryFile, format_history_csv(report)},
  };
  std::vector<fs::path> staged;
  auto cleanup = [&] {
    for (const auto& p : staged) fs::remove(p, ec);
  };
  for (const auto& [path, text] : files) {
    auto tmp = path;
    tmp += ".tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      cleanup();
      fail(Errc::io, "cannot write '" + tmp.string() + "'");
    }
    staged.push_back(tmp);
    out << text;
    out.close();
    if (!out) {
      cleanup();
      fail(Errc::io, "write failed for '" + tmp.string() + "'");
    }
  }
  for (std::size_t k = 0; k < files.size(); ++k) {
    fs::rename(staged[k], files[k].first, ec);
    if (ec) {
      cleanup();
      fail(Errc::io, "cannot move '" + staged[k].string() + "' into place: " + ec.message());
    }
  }
}

/// Per-feature scaling in place.
inline void normalize_features(Matrix& m, Normalization how) {
  if (how == Normalization::none || m.rows() == 0) return;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (how == Normalization::unit_interval) {
      double lo = m(0, c), hi = m(0, c);
      for (std::size_t i = 1; i < m.rows(); ++i) {
        lo = std::min(lo, m(i, c));
        hi = std::max(hi, m(i, c));
      }
      const double span = hi - lo;
      for (std::size_t i = 0; i < m.rows(); ++i) m(i, c) = span > 0.0 ? (m(i, c) - lo) / span : 0.0;
    } else {
      double mean = 0.0;
      for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, c);
      mean /= static_cast<double>(m.rows());
      double var = 0.0;
      for (std::size_t i = 0; i < m.rows(); ++i) var += (m(i, c) - mean) * (m(i, c) - mean);
      const double sd = std::sqrt(var / static_cast<double>(m.rows()));
      for (std::size_t i = 0; i < m.rows(); ++i) m(i, c) = sd > 0.0 ? (m(i, c) - mean) / sd : 0.0;
    }
  }
}

/// Independent deterministic streams derived from the run seed.
enum class Stream : std::uint64_t { pretrain = 1, init = 2, joint = 3 };

inline Rng stream_rng(std::uint64_t seed, Stream s) {
  return Rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(s)));
}

namespace detail {

/// Runs fn, prefixing any library error with the pipeline stage name.
template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("[") + stage + "] " + e.what());
  }
}

}  // namespace detail

/// Runs one experiment on in-memory views (raw, before normalization).
inline RunReport run_on_data(const RunConfig& cfg, std::vector<Matrix> views,
                             std::optional<std::vector<Label>> truth = std::nullopt) {
  detail::in_stage("config", [&] {
    cfg.validate(false);
    require(views.size() == cfg.views.size(), Errc::config,
            "config lists " + std::to_string(cfg.views.size()) + " views, got " +
                std::to_string(views.size()) + " matrices");
  });
  const std::size_t n = detail::in_stage("load", [&] {
    const std::size_t rows = detail::common_rows(views);
    require(rows >= cfg.clusters, Errc::shape_mismatch,
            "fewer samples (" + std::to_string(rows) + ") than clusters");
    if (truth)
      require(truth->size() == rows, Errc::shape_mismatch,
              "labels file has " + std::to_string(truth->size()) + " entries, views have " +
                  std::to_string(rows) + " rows");
    return rows;
  });

  std::vector<std::size_t> active;
  if (cfg.single_view_method())
    active.push_back(cfg.view_index);
  else
    for (std::size_t v = 0; v < views.size(); ++v) active.push_back(v);

  std::vector<Matrix> data;
  detail::in_stage("normalize", [&] {
    for (auto v : active) {
      data.push_back(std::move(views[v]));
      normalize_features(data.back(), cfg.views[v].normalization);
    }
  });

  RunReport report;
  auto& s = report.summary;
  s.method = std::string(to_string(cfg.method));
  s.n_samples = n;
  s.n_views = active.size();
  s.clusters = cfg.clusters;
  s.seed = cfg.seed;
  report.has_truth = truth.has_value();

  std::vector<MlpParams> encoders;
  std::vector<Matrix> embeddings;
  detail::in_stage("pretrain", [&] {
    PretrainOptions po;
    po.epochs = cfg.pretrain.epochs;
    po.batch_size = cfg.pretrain.batch_size;
    po.optimizer = OptimizerConfig::defaults(OptimizerKind::adam);
    po.optimizer.lr = cfg.pretrain.lr;
    for (std::size_t k = 0; k < active.size(); ++k) {
      std::vector<std::size_t> dims{data[k].cols()};
      const auto& enc = cfg.views[active[k]].encoder_dims;
      dims.insert(dims.end(), enc.begin(), enc.end());
      // Every view starts from the same stream, so identical views get identical encoders.
      Rng rng = stream_rng(cfg.seed, Stream::pretrain);
      auto r = pretrain(MlpSpec::standard(dims), data[k], po, rng);
      s.pretrain_final_loss.push_back(r.loss_history.back());
      embeddings.push_back(encode(r.params, data[k]));
      encoders.push_back(std::move(r.params));
    }
  });

  Rng init_rng = stream_rng(cfg.seed, Stream::init);
  Rng joint_rng = stream_rng(cfg.seed, Stream::joint);
  JointOptions jo;
  jo.hyper = cfg.hyper;
  jo.hyper.max_epochs = cfg.joint.max_epochs;
  jo.batch_size = cfg.joint.batch_size;
  jo.optimizer = OptimizerConfig::defaults(cfg.joint.optimizer);
  jo.optimizer.lr = cfg.joint.lr;
  if (truth) jo.truth = *truth;

  TrainHistory history;
  switch (cfg.method) {
    case Method::s_view:
    case Method::s_all_views: {
      auto km = detail::in_stage("cluster", [&] {
        return kmeans(embeddings.size() == 1 ? embeddings.front() : hconcat(embeddings),
                      cfg.clusters, init_rng, cfg.kmeans);
      });
      report.labels = std::move(km.labels);
      s.final_loss = km.inertia;
      break;
    }
    case Method::dec: {
      auto init = detail::in_stage(
          "init", [&] { return init_view_centroids(embeddings, cfg.clusters, init_rng, cfg.kmeans); });
      auto r = detail::in_stage("joint", [&] {
        return dec_train({std::move(encoders.front()), std::move(init.centroids.front())},
                         data.front(), jo, joint_rng);
      });
      history = std::move(r.history);
      report.labels = std::move(r.labels);
      s.final_loss = r.final_loss;
      s.weights = {1.0};
      break;
    }
    case Method::dmjc_s: {
      auto init = detail::in_stage(
          "init", [&] { return init_view_centroids(embeddings, cfg.clusters, init_rng, cfg.kmeans); });
      auto r = detail::in_stage("joint", [&] {
        return dmjc_s_train(DmjcSModel::initial(std::move(encoders), std::move(init.centroids)),
                            data, jo, joint_rng);
      });
      history = std::move(r.history);
      report.labels = std::move(r.labels);
      s.final_loss = r.final_loss;
      const Matrix pi = importance_softmax(r.model.w);
      s.weights.assign(pi.cols(), 0.0);
      for (std::size_t j = 0; j < pi.rows(); ++j)
        for (std::size_t v = 0; v < pi.cols(); ++v) s.weights[v] += pi(j, v);
      break;
    }
    case Method::dmjc_t: {
      auto init = detail::in_stage(
          "init", [&] { return init_view_centroids(embeddings, cfg.clusters, init_rng, cfg.kmeans); });
      auto r = detail::in_stage("joint", [&] {
        return dmjc_t_train(DmjcTModel::initial(std::move(encoders), std::move(init.centroids)),
                            data, jo, DmjcTOptions{cfg.lambda, cfg.apg}, joint_rng);
      });
      history = std::move(r.history);
      report.labels = std::move(r.labels);
      s.final_loss = r.final_loss;
      s.weights = r.model.w;
      break;
    }
  }

  s.epochs_run = history.epochs_run();
  s.converged = history.converged;
  report.history = std::move(history.epochs);
  report.history_views = report.history.empty() ? 0 : active.size();

  if (truth) {
    detail::in_stage("evaluate", [&] {
      s.acc = clustering_accuracy(report.labels, *truth);
      s.nmi = nmi(report.labels, *truth);
      s.ari = ari(report.labels, *truth);
    });
  }
  return report;
}

/// Loads the configured feature files (and labels), runs the experiment and
/// writes the report into the output directory.
inline RunReport run_pipeline(const RunConfig& cfg) {
  detail::in_stage("config", [&] { cfg.validate(); });
  std::vector<Matrix> views;
  std::optional<std::vector<Label>> truth;
  detail::in_stage("load", [&] {
    for (const auto& v : cfg.views) views.push_back(load_feature_matrix(cfg.resolve(v.feature_file)));
    if (cfg.labels_file) truth = load_labels(cfg.resolve(*cfg.labels_file));
  });
  auto report = run_on_data(cfg, std::move(views), std::move(truth));
  detail::in_stage("report", [&] { emit_report(report, cfg.resolve(cfg.output_dir)); });
  return report;
}

}  // namespace dmjc
