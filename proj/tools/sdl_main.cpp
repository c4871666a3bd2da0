#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sdl/errors.hpp"
#include "sdl/features.hpp"
#include "sdl/io.hpp"
#include "sdl/sdl_density.hpp"
#include "sdl/sdl_spd.hpp"
#include "sdl/selftest.hpp"
#include "sdl/util.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct Options {
  std::string mode = "density";
  std::string data;
  std::string model;
  std::string out;
  int atoms = 8;
  double eta = 0.0;  // 0 = per-mode default
  double tol = 1e-8;
  int max_iters = 0;  // 0 = per-mode default
  std::string divergence = "kl";
  double sparsity_threshold = 0.01;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string report = "json";
  double smoothing_eps = 1e-10;
  bool no_backtracking = false;
  // features
  std::string filter = "gradient5";
  int block_size = 32;
  double sigma = 0.0;  // 0 = data-scaled default
  // selftest debug hook
  bool inject_gradient_bug = false;
};

void add_common_flags(CLI::App* cmd, Options& opt) {
  cmd->add_option("--mode", opt.mode, "Data mode")->check(CLI::IsMember({"density", "spd"}));
  cmd->add_option("--seed", opt.seed, "64-bit RNG seed (all randomness flows from it)");
  cmd->add_option("--threads", opt.threads, "Cap worker threads (0 = library default)");
  cmd->add_option("--report", opt.report, "Metrics format")->check(CLI::IsMember({"json", "text"}));
  cmd->add_option("--sparsity-threshold", opt.sparsity_threshold, "Sparsity count threshold");
}

void add_solver_flags(CLI::App* cmd, Options& opt) {
  cmd->add_option("--atoms", opt.atoms, "Dictionary size r");
  cmd->add_option("--eta", opt.eta, "Step size (default 0.1 density, 0.01 spd)");
  cmd->add_option("--tol", opt.tol, "Objective-change stopping tolerance");
  cmd->add_option("--max-iters", opt.max_iters, "Iteration cap (default 500 density, 300 spd)");
  cmd->add_option("--divergence", opt.divergence, "Density divergence")
      ->check(CLI::IsMember({"kl", "hellinger"}));
  cmd->add_option("--smoothing-eps", opt.smoothing_eps, "Zero-bin smoothing epsilon");
  cmd->add_flag("--no-backtracking", opt.no_backtracking, "Disable the backtracking line search");
}

sdl::SdlConfig build_config(const Options& opt) {
  sdl::SdlConfig config =
      opt.mode == "spd" ? sdl::SdlConfig::spd_defaults() : sdl::SdlConfig::density_defaults();
  config.num_atoms = opt.atoms;
  if (opt.eta > 0.0) config.eta = opt.eta;
  config.tol = opt.tol;
  if (opt.max_iters > 0) config.max_iters = opt.max_iters;
  config.divergence = sdl::divergence_from_string(opt.divergence);
  config.smoothing_eps = opt.smoothing_eps;
  config.seed = opt.seed;
  config.sparsity_threshold = opt.sparsity_threshold;
  config.backtracking = !opt.no_backtracking;
  config.validate();
  return config;
}

void apply_threads(const Options& opt) {
#ifdef _OPENMP
  if (opt.threads >= 1) omp_set_num_threads(opt.threads);
#else
  (void)opt;
#endif
}

void emit_metrics(const Options& opt, const sdl::MetricsRecord& metrics) {
  if (opt.report == "text") {
    std::cout << metrics.to_text();
  } else {
    std::cout << metrics.to_json() << "\n";
  }
  if (!opt.out.empty()) {
    std::ofstream out(opt.out);
    if (!out) throw sdl::IoError("cannot write metrics file: " + opt.out);
    out << metrics.to_json() << "\n";
  }
  sdl::log_info("wall_time_s=" + std::to_string(metrics.wall_time_s));
}

double density_recon_error(const sdl::DensitySet& data, const sdl::DensityDictionary& dict,
                           const sdl::CodeMatrix& codes) {
  const Eigen::MatrixXd atom_rows = dict.as_matrix();
  const double k = static_cast<double>(dict.bins());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < codes.samples(); ++i) {
    const Eigen::VectorXd recon = atom_rows.transpose() * codes.row(i);
    acc += (recon - data[static_cast<std::size_t>(i)].values()).squaredNorm() / k;
  }
  return acc / static_cast<double>(codes.samples());
}

double spd_recon_error(const sdl::SpdSet& data, const sdl::SpdDictionary& dict,
                       const sdl::CodeMatrix& codes) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < codes.samples(); ++i) {
    const sdl::SpdMatrix recon =
        sdl::reconstruct_spd(dict, sdl::SimplexWeights(sdl::project_to_simplex(codes.row(i))));
    acc += sdl::airm_distance(data[static_cast<std::size_t>(i)], recon);
  }
  return acc / static_cast<double>(codes.samples());
}

int cmd_learn(const Options& opt) {
  apply_threads(opt);
  const sdl::SdlConfig config = build_config(opt);
  sdl::MetricsRecord metrics;
  metrics.mode = opt.mode;
  metrics.seed = config.seed;
  if (opt.mode == "density") {
    const sdl::DensityDataset ds = sdl::load_density_file(opt.data);
    const sdl::DensityLearnResult fit = sdl::learn_density(ds.densities, config);
    sdl::save_density_model(opt.model, {fit.dictionary, config, fit.report.final_objective,
                                        fit.report.sparsity, fit.report.iterations,
                                        fit.report.converged});
    metrics.objective = fit.report.final_objective;
    metrics.sparsity = fit.report.sparsity;
    metrics.recon_error = density_recon_error(ds.densities, fit.dictionary, fit.codes);
    metrics.iterations = fit.report.iterations;
    metrics.converged = fit.report.converged;
    metrics.wall_time_s = fit.report.wall_time_s;
  } else {
    const sdl::SpdDataset ds = sdl::load_spd_file(opt.data);
    const sdl::SpdLearnResult fit = sdl::learn_spd(ds.matrices, config);
    sdl::save_spd_model(opt.model, {fit.dictionary, config, fit.report.final_objective,
                                    fit.report.sparsity, fit.report.mean_airm_error,
                                    fit.report.iterations, fit.report.converged});
    metrics.objective = fit.report.final_objective;
    metrics.sparsity = fit.report.sparsity;
    metrics.recon_error = fit.report.mean_airm_error;
    metrics.iterations = fit.report.iterations;
    metrics.converged = fit.report.converged;
    metrics.wall_time_s = fit.report.wall_time_s;
  }
  emit_metrics(opt, metrics);
  return kExitOk;
}

int cmd_encode(const Options& opt) {
  apply_threads(opt);
  sdl::MetricsRecord metrics;
  metrics.mode = opt.mode;
  const auto t0 = std::chrono::steady_clock::now();
  if (opt.mode == "density") {
    const sdl::DensityModel model = sdl::load_density_model(opt.model);
    const sdl::DensityDataset ds = sdl::load_density_file(opt.data);
    sdl::SdlConfig config = model.config;
    config.sparsity_threshold = opt.sparsity_threshold;
    const sdl::CodeMatrix codes = sdl::sparse_code_density(ds.densities, model.dictionary, config);
    sdl::save_codes_file(opt.out, codes);
    metrics.objective = sdl::objective_density(ds.densities, model.dictionary, codes, config.divergence);
    metrics.sparsity = sdl::sparsity_percent(codes, config.sparsity_threshold);
    metrics.recon_error = density_recon_error(ds.densities, model.dictionary, codes);
    metrics.seed = config.seed;
  } else {
    const sdl::SpdModel model = sdl::load_spd_model(opt.model);
    const sdl::SpdDataset ds = sdl::load_spd_file(opt.data);
    sdl::SdlConfig config = model.config;
    config.sparsity_threshold = opt.sparsity_threshold;
    const sdl::CodeMatrix codes = sdl::sparse_code_spd(ds.matrices, model.dictionary, config);
    sdl::save_codes_file(opt.out, codes);
    metrics.objective = sdl::objective_spd(ds.matrices, model.dictionary, codes);
    metrics.sparsity = sdl::sparsity_percent(codes, config.sparsity_threshold);
    metrics.recon_error = spd_recon_error(ds.matrices, model.dictionary, codes);
    metrics.seed = config.seed;
  }
  metrics.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Options metrics_opt = opt;
  metrics_opt.out.clear();  // --out holds the codes file
  emit_metrics(metrics_opt, metrics);
  return kExitOk;
}

int cmd_eval(const Options& opt) {
  apply_threads(opt);
  sdl::MetricsRecord metrics;
  metrics.mode = opt.mode;
  const auto t0 = std::chrono::steady_clock::now();
  if (opt.mode == "density") {
    const sdl::DensityModel model = sdl::load_density_model(opt.model);
    const sdl::DensityDataset ds = sdl::load_density_file(opt.data);
    const sdl::CodeMatrix codes = sdl::sparse_code_density(ds.densities, model.dictionary, model.config);
    metrics.objective = sdl::objective_density(ds.densities, model.dictionary, codes,
                                               model.config.divergence);
    metrics.sparsity = sdl::sparsity_percent(codes, opt.sparsity_threshold);
    metrics.recon_error = density_recon_error(ds.densities, model.dictionary, codes);
    metrics.seed = model.config.seed;
    if (!opt.out.empty()) sdl::save_code_table(opt.out, codes, ds.labels);
  } else {
    const sdl::SpdModel model = sdl::load_spd_model(opt.model);
    const sdl::SpdDataset ds = sdl::load_spd_file(opt.data);
    const sdl::CodeMatrix codes = sdl::sparse_code_spd(ds.matrices, model.dictionary, model.config);
    metrics.objective = sdl::objective_spd(ds.matrices, model.dictionary, codes);
    metrics.sparsity = sdl::sparsity_percent(codes, opt.sparsity_threshold);
    metrics.recon_error = spd_recon_error(ds.matrices, model.dictionary, codes);
    metrics.seed = model.config.seed;
    if (!opt.out.empty()) sdl::save_code_table(opt.out, codes, ds.labels);
  }
  metrics.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Options metrics_opt = opt;
  metrics_opt.out.clear();  // --out holds the per-sample table
  emit_metrics(metrics_opt, metrics);
  return kExitOk;
}

int cmd_features(const Options& opt) {
  apply_threads(opt);
  sdl::FeatureConfig cfg;
  cfg.block_size = opt.block_size;
  if (opt.sigma > 0.0) cfg.sigma = opt.sigma;
  cfg.filter_bank = sdl::filter_bank_from_string(opt.filter);
  cfg.validate();
  const bool pmf_mode = opt.mode == "density";
  const sdl::ImageDatasetResult result = sdl::extract_image_dataset(opt.data, pmf_mode, cfg);
  if (pmf_mode) {
    sdl::save_density_file(opt.out, result.densities, &result.labels);
  } else {
    sdl::save_spd_file(opt.out, result.descriptors, &result.labels);
  }
  {
    std::ofstream labels(opt.out + ".labels.json");
    if (!labels) throw sdl::IoError("cannot write label map: " + opt.out + ".labels.json");
    labels << "{";
    for (std::size_t i = 0; i < result.class_names.size(); ++i) {
      if (i) labels << ", ";
      labels << "\"" << result.class_names[i] << "\": " << i;
    }
    labels << "}\n";
  }
  if (!result.skipped.empty()) {
    std::ofstream sidecar(opt.out + ".skipped.txt");
    for (const auto& s : result.skipped) sidecar << s << "\n";
    std::cerr << "warning: skipped " << result.skipped.size() << " image(s); see " << opt.out
              << ".skipped.txt\n";
  }
  std::cout << "wrote " << (pmf_mode ? result.densities.size() : result.descriptors.size())
            << " records (" << result.class_names.size() << " classes) to " << opt.out << "\n";
  return kExitOk;
}

int cmd_selftest(const Options& opt) {
  apply_threads(opt);
  sdl::SelftestOptions st;
  st.seed = opt.seed;
  st.inject_gradient_bug = opt.inject_gradient_bug;
  const sdl::SelftestReport report = sdl::run_selftest(st);
  sdl::print_selftest_report(std::cout, report);
  return report.all_pass ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-theoretic dictionary learning and sparse coding for probability "
               "densities and SPD matrices"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* learn = app.add_subcommand("learn", "Fit a dictionary and codes to a dataset");
  add_common_flags(learn, opt);
  add_solver_flags(learn, opt);
  learn->add_option("--data", opt.data, "Input dataset path")->required();
  learn->add_option("--model", opt.model, "Output model path (JSON)")->required();
  learn->add_option("--out", opt.out, "Optional metrics JSON path");

  CLI::App* encode = app.add_subcommand("encode", "Sparse-code a dataset with a fixed model");
  add_common_flags(encode, opt);
  encode->add_option("--data", opt.data, "Input dataset path")->required();
  encode->add_option("--model", opt.model, "Model path")->required();
  encode->add_option("--out", opt.out, "Output codes path")->required();

  CLI::App* eval = app.add_subcommand("eval", "Reconstruction metrics for a model on a dataset");
  add_common_flags(eval, opt);
  eval->add_option("--data", opt.data, "Input dataset path")->required();
  eval->add_option("--model", opt.model, "Model path")->required();
  eval->add_option("--out", opt.out, "Optional label+code table path");

  CLI::App* features = app.add_subcommand("features", "Extract pmf or covariance features from images");
  add_common_flags(features, opt);
  features->add_option("--data", opt.data, "Image directory (subdirectory = class)")->required();
  features->add_option("--out", opt.out, "Output dataset path")->required();
  features->add_option("--filter", opt.filter, "SPD filter bank")
      ->check(CLI::IsMember({"gradient5", "texture_eth80"}));
  features->add_option("--block-size", opt.block_size, "Block size for gradient5 descriptors");
  features->add_option("--sigma", opt.sigma, "SPD regularizer (0 = scale to data)");

  CLI::App* selftest = app.add_subcommand("selftest", "Run the numerical verification suites");
  add_common_flags(selftest, opt);
  selftest->add_flag("--debug-inject-gradient-bug", opt.inject_gradient_bug)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (learn->parsed()) return cmd_learn(opt);
    if (encode->parsed()) return cmd_encode(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (features->parsed()) return cmd_features(opt);
    if (selftest->parsed()) return cmd_selftest(opt);
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const sdl::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sdl::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
