#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dmjc/dmjc.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> method, std::optional<std::size_t> max_epochs) {
  dmjc::RunConfig cfg = dmjc::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (method) cfg.method = dmjc::method_from_string(*method);
  if (max_epochs) {
    cfg.joint.max_epochs = *max_epochs;
    cfg.hyper.max_epochs = *max_epochs;
  }
  const auto report = dmjc::run_pipeline(cfg);
  const auto& s = report.summary;
  std::cout << s.method << ": epochs=" << s.epochs_run << " final_loss=" << s.final_loss;
  if (s.acc) std::cout << " acc=" << *s.acc << " nmi=" << *s.nmi << " ari=" << *s.ari;
  std::cout << "\nreport written to " << cfg.resolve(cfg.output_dir).string() << "\n";
  return 0;
}

int cmd_synth(std::size_t views, std::size_t clusters, std::size_t n, std::size_t dim,
              const std::string& out, std::uint64_t seed) {
  auto spec = dmjc::SyntheticSpec::complementary(views, clusters, n);
  spec.dim = dim;
  dmjc::Rng rng(seed);
  const auto data = dmjc::make_synthetic(spec, rng);

  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  dmjc::require(!ec, dmjc::Errc::io, "cannot create '" + dir.string() + "'");

  dmjc::RunConfig cfg;
  cfg.clusters = clusters;
  cfg.seed = seed;
  cfg.pretrain = {200, 64, 1e-3};
  for (std::size_t v = 0; v < views; ++v) {
    const std::string name = "view_" + std::to_string(v + 1) + ".csv";
    dmjc::write_csv_matrix(dir / name, data.views[v]);
    cfg.views.push_back({name, {dim, 2}, dmjc::Normalization::standardize});
  }
  dmjc::write_labels(dir / "labels.csv", data.labels);
  cfg.labels_file = "labels.csv";
  cfg.output_dir = "report";
  dmjc::detail::write_file_atomic(dir / "config.json", dmjc::config_to_json(cfg).dump(2) + "\n");
  std::cout << "wrote " << views << " views x " << data.labels.size() << " samples to "
            << dir.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path) {
  const auto pred = dmjc::load_labels(pred_path);
  const auto truth = dmjc::load_labels(truth_path);
  dmjc::require(pred.size() == truth.size(), dmjc::Errc::shape_mismatch,
                "prediction has " + std::to_string(pred.size()) + " labels, truth has " +
                    std::to_string(truth.size()));
  nlohmann::ordered_json j;
  j["n_samples"] = pred.size();
  j["acc"] = dmjc::clustering_accuracy(pred, truth);
  j["nmi"] = dmjc::nmi(pred, truth);
  j["ari"] = dmjc::ari(pred, truth);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep multi-view joint clustering"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::size_t> max_epochs;
  auto* run = app.add_subcommand("run", "Train and evaluate from a JSON config");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--method", method, "Override the method (dec, dmjc_s, dmjc_t, s_view, s_all_views)");
  run->add_option("--max-epochs", max_epochs, "Override joint.max_epochs");

  std::size_t views = 3, clusters = 4, n = 150, dim = 8;
  std::uint64_t synth_seed = 0;
  std::string out;
  auto* synth = app.add_subcommand("synth", "Write a complementary-view Gaussian dataset");
  synth->add_option("--views", views, "Number of views")->check(CLI::PositiveNumber);
  synth->add_option("--clusters", clusters, "Number of clusters")->check(CLI::PositiveNumber);
  synth->add_option("--n", n, "Samples per cluster")->check(CLI::PositiveNumber);
  synth->add_option("--dim", dim, "Feature dimension per view")->check(CLI::PositiveNumber);
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Random seed");

  std::string pred_path, truth_path;
  auto* eval = app.add_subcommand("eval", "Score predicted labels against ground truth");
  eval->add_option("--pred", pred_path, "Predicted labels CSV")->required();
  eval->add_option("--truth", truth_path, "Ground-truth labels CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(config_path, seed, method, max_epochs);
    if (*synth) return cmd_synth(views, clusters, n, dim, out, synth_seed);
    if (*eval) return cmd_eval(pred_path, truth_path);
  } catch (const dmjc::Error& e) {
    std::cerr << "error (" << dmjc::errc_name(e.code()) << "): " << e.what() << "\n";
    return dmjc::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
